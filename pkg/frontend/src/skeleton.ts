/**
 * 2D orthographic projection of the snapshot's skeleton polylines.
 * Display-only: the points come from the server's forward kinematics.
 */

export type Plane = "xy" | "xz" | "yz";

export interface Projected {
  finger: string;
  points: { x: number; y: number }[];
}

const AXES: Record<Plane, [number, number]> = { xy: [0, 1], xz: [0, 2], yz: [1, 2] };

export function projectSkeleton(
  skeleton: Record<string, number[][]>,
  plane: Plane,
  width: number,
  height: number,
  margin = 18,
): Projected[] {
  const [ax, ay] = AXES[plane];
  const fingers = Object.keys(skeleton).sort();
  const points = fingers.flatMap((f) => skeleton[f]);
  if (points.length === 0) {
    return [];
  }
  const xs = points.map((p) => p[ax]);
  const ys = points.map((p) => p[ay]);
  const minX = Math.min(...xs, 0);
  const maxX = Math.max(...xs, 1e-6);
  const minY = Math.min(...ys, 0);
  const maxY = Math.max(...ys, 1e-6);
  const scale = Math.min(
    (width - 2 * margin) / Math.max(maxX - minX, 1e-6),
    (height - 2 * margin) / Math.max(maxY - minY, 1e-6),
  );
  return fingers.map((finger) => ({
    finger,
    points: skeleton[finger].map((p) => ({
      x: margin + (p[ax] - minX) * scale,
      // screen y grows downward
      y: height - margin - (p[ay] - minY) * scale,
    })),
  }));
}

interface StrokeContext {
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
}

const FINGER_COLORS: Record<string, string> = {
  thumb: "#d1495b",
  index: "#3987c9",
  middle: "#2e9e62",
  ring: "#b38a2e",
};

export function drawSkeleton(
  ctx: StrokeContext,
  skeleton: Record<string, number[][]>,
  plane: Plane,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  for (const { finger, points } of projectSkeleton(skeleton, plane, width, height)) {
    ctx.strokeStyle = FINGER_COLORS[finger] ?? "#777";
    ctx.fillStyle = ctx.strokeStyle;
    ctx.lineWidth = 2;
    ctx.beginPath();
    points.forEach((p, i) => (i === 0 ? ctx.moveTo(p.x, p.y) : ctx.lineTo(p.x, p.y)));
    ctx.stroke();
    for (const p of points) {
      ctx.beginPath();
      ctx.arc(p.x, p.y, 3, 0, Math.PI * 2);
      ctx.fill();
    }
  }
}
