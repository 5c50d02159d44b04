/**
 * Wire protocol types and frame encoding for the session server.
 *
 * One JSON object per WebSocket text frame: {kind, seq, payload}. Sequence
 * numbers are monotone per direction; the console assigns its own outbound
 * counter in the connection layer.
 */

export const PROTOCOL_VERSION = "1";

export type Hand = "left" | "right";
export const HANDS: Hand[] = ["left", "right"];

export interface TypeAttributes {
  hand_posture: string;
  object_categories: string[];
  contact_parts: string[];
  part_geometry: string[];
  grasp_direction: string;
  purpose: string;
}

export interface LibraryEntry {
  id: string;
  name: string;
  category: { top: string; sub: string };
  handedness: string;
  attributes: TypeAttributes;
}

export interface CalibrationData {
  fingers: string[];
  p_stretch: number[][];
  p_contract: number[][];
}

export interface HandSnapshot {
  active_type: string | null;
  joints: number[];
  ratios: Record<string, number>;
  arm: { position: number[]; rotvec: number[] };
  skeleton: Record<string, number[][]>;
}

export interface PlanStepPayload {
  description: string;
  left_type: string | null;
  right_type: string | null;
}

export interface SnapshotPayload {
  protocol_version: string;
  mode: string;
  tick: number;
  recording: boolean;
  library_rev: number;
  plan: { steps: PlanStepPayload[] } | null;
  hands: Record<Hand, HandSnapshot>;
  hand_model_id?: string;
  library?: LibraryEntry[];
  calibration?: Record<Hand, CalibrationData>;
}

export interface PlanNoticePayload {
  plan: { steps: PlanStepPayload[] };
  source: string;
  request_text: string;
  applied: boolean;
}

export interface ErrorPayload {
  message: string;
  code: string;
  field?: string;
}

export type ServerMessage =
  | { kind: "snapshot"; seq: number; payload: SnapshotPayload }
  | { kind: "plan_notice"; seq: number; payload: PlanNoticePayload }
  | { kind: "error"; seq: number; payload: ErrorPayload };

export interface ClientMessage {
  kind:
    | "select_type"
    | "adjust_fingertip"
    | "command_text"
    | "calibrate"
    | "teach_control"
    | "glove_frame";
  seq: number;
  payload: Record<string, unknown>;
}

export function encodeMessage(msg: ClientMessage): string {
  return JSON.stringify({ kind: msg.kind, seq: msg.seq, payload: msg.payload });
}

const SERVER_KINDS = new Set(["snapshot", "plan_notice", "error"]);

/** Parse a server frame; throws on anything malformed. */
export function decodeServerMessage(text: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(text);
  } catch (err) {
    throw new Error(`frame is not valid JSON: ${err}`);
  }
  if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
    throw new Error("frame must be a JSON object");
  }
  const record = doc as Record<string, unknown>;
  const kind = record.kind;
  if (typeof kind !== "string" || !SERVER_KINDS.has(kind)) {
    throw new Error(`unexpected server message kind ${JSON.stringify(kind)}`);
  }
  const seq = record.seq;
  if (typeof seq !== "number" || !Number.isInteger(seq) || seq < 0) {
    throw new Error("seq must be a non-negative integer");
  }
  if (typeof record.payload !== "object" || record.payload === null) {
    throw new Error("payload must be an object");
  }
  return { kind, seq, payload: record.payload } as ServerMessage;
}
