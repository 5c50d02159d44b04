import { describe, expect, it } from "vitest";

import { decodeServerMessage, encodeMessage } from "../src/protocol.js";

describe("protocol frames", () => {
  it("encodes client messages with kind/seq/payload", () => {
    const text = encodeMessage({ kind: "select_type", seq: 3, payload: { type_id: "x", hand: "right" } });
    expect(JSON.parse(text)).toEqual({
      kind: "select_type",
      seq: 3,
      payload: { type_id: "x", hand: "right" },
    });
  });

  it("decodes server snapshots", () => {
    const msg = decodeServerMessage(
      JSON.stringify({ kind: "snapshot", seq: 0, payload: { protocol_version: "1" } }),
    );
    expect(msg.kind).toBe("snapshot");
    expect(msg.seq).toBe(0);
  });

  it.each([
    "not json",
    "[1,2]",
    JSON.stringify({ kind: "select_type", seq: 0, payload: {} }), // client kind from server
    JSON.stringify({ kind: "snapshot", seq: -1, payload: {} }),
    JSON.stringify({ kind: "snapshot", seq: 0, payload: 7 }),
  ])("rejects malformed frame %#", (frame) => {
    expect(() => decodeServerMessage(frame)).toThrow();
  });
});
