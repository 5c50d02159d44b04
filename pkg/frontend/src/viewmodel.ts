/**
 * Pure view model: the console renders only what arrived in snapshots and
 * plan notices. No kinematics are computed client-side; skeleton polylines
 * come through the snapshot and are merely projected for display. Because
 * reduce() is pure and the server's first snapshot is full, reconnecting
 * rebuilds the identical view.
 */

import {
  HANDS,
  PROTOCOL_VERSION,
  type CalibrationData,
  type Hand,
  type HandSnapshot,
  type LibraryEntry,
  type PlanStepPayload,
  type ServerMessage,
} from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected" | "incompatible";

export interface TaxonomyNode {
  top: string;
  subs: { sub: string; entries: LibraryEntry[] }[];
}

export interface ViewModel {
  connection: ConnectionStatus;
  statusDetail: string;
  mode: string;
  tick: number;
  recording: boolean;
  libraryRev: number;
  handModelId: string;
  library: LibraryEntry[];
  taxonomy: TaxonomyNode[];
  calibration: Record<Hand, CalibrationData> | null;
  hands: Record<Hand, HandSnapshot>;
  plan: { steps: PlanStepPayload[]; source: string; requestText: string; applied: boolean } | null;
  errors: string[];
  snapshotCount: number;
}

const EMPTY_HAND: HandSnapshot = {
  active_type: null,
  joints: [],
  ratios: {},
  arm: { position: [0, 0, 0], rotvec: [0, 0, 0] },
  skeleton: {},
};

export function initialViewModel(): ViewModel {
  return {
    connection: "connecting",
    statusDetail: "",
    mode: "idle",
    tick: 0,
    recording: false,
    libraryRev: -1,
    handModelId: "",
    library: [],
    taxonomy: [],
    calibration: null,
    hands: { left: { ...EMPTY_HAND }, right: { ...EMPTY_HAND } },
    plan: null,
    errors: [],
    snapshotCount: 0,
  };
}

export function buildTaxonomy(library: LibraryEntry[]): TaxonomyNode[] {
  const byTop = new Map<string, Map<string, LibraryEntry[]>>();
  for (const entry of library) {
    const subs = byTop.get(entry.category.top) ?? new Map<string, LibraryEntry[]>();
    const list = subs.get(entry.category.sub) ?? [];
    list.push(entry);
    subs.set(entry.category.sub, list);
    byTop.set(entry.category.top, subs);
  }
  return [...byTop.entries()]
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([top, subs]) => ({
      top,
      subs: [...subs.entries()]
        .sort(([a], [b]) => a.localeCompare(b))
        .map(([sub, entries]) => ({
          sub,
          entries: entries.slice().sort((a, b) => a.id.localeCompare(b.id)),
        })),
    }));
}

const MAX_ERRORS = 8;

export function reduce(vm: ViewModel, msg: ServerMessage): ViewModel {
  switch (msg.kind) {
    case "snapshot": {
      const payload = msg.payload;
      if (payload.protocol_version !== PROTOCOL_VERSION) {
        return {
          ...vm,
          connection: "incompatible",
          statusDetail: `server speaks protocol ${payload.protocol_version}, console needs ${PROTOCOL_VERSION}`,
        };
      }
      const library = payload.library ?? vm.library;
      const hands = { ...vm.hands };
      for (const hand of HANDS) {
        if (payload.hands[hand]) {
          hands[hand] = payload.hands[hand];
        }
      }
      return {
        ...vm,
        connection: "connected",
        statusDetail: "",
        mode: payload.mode,
        tick: payload.tick,
        recording: payload.recording,
        libraryRev: payload.library_rev,
        handModelId: payload.hand_model_id ?? vm.handModelId,
        library,
        taxonomy: payload.library ? buildTaxonomy(payload.library) : vm.taxonomy,
        calibration: payload.calibration ?? vm.calibration,
        hands,
        // plan_notice carries the richer record; snapshots only confirm
        // whether a plan is active.
        plan:
          payload.plan === null
            ? null
            : vm.plan ?? { steps: payload.plan.steps, source: "", requestText: "", applied: false },
        snapshotCount: vm.snapshotCount + 1,
      };
    }
    case "plan_notice":
      return {
        ...vm,
        plan: {
          steps: msg.payload.plan.steps,
          source: msg.payload.source,
          requestText: msg.payload.request_text,
          applied: msg.payload.applied,
        },
      };
    case "error":
      return {
        ...vm,
        errors: [...vm.errors, `${msg.payload.code}: ${msg.payload.message}`].slice(-MAX_ERRORS),
      };
  }
}

export function connectionChanged(
  vm: ViewModel,
  status: ConnectionStatus,
  detail = "",
): ViewModel {
  if (vm.connection === "incompatible" && status === "connected") {
    return vm; // stay on the explicit incompatibility banner
  }
  return { ...vm, connection: status, statusDetail: detail };
}

/** The slice of the view a reconnect must reproduce exactly. */
export function comparableView(vm: ViewModel): unknown {
  return {
    mode: vm.mode,
    libraryRev: vm.libraryRev,
    handModelId: vm.handModelId,
    library: vm.library,
    taxonomy: vm.taxonomy,
    calibration: vm.calibration,
    hands: vm.hands,
  };
}
