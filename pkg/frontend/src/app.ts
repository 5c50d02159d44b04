/**
 * Browser entry point: wires the session connection and view model to the
 * DOM. Server address comes from the `?server=` query parameter, falling
 * back to a /ws endpoint on the page host.
 */

import { browserTransportFactory, SessionConnection } from "./connection.js";
import { GloveThrottle, gloveFramePayload } from "./glove.js";
import { HANDS, type Hand } from "./protocol.js";
import { drawSkeleton } from "./skeleton.js";
import {
  connectionChanged,
  initialViewModel,
  reduce,
  type ViewModel,
} from "./viewmodel.js";

const FINGERS = ["thumb", "index", "middle", "ring", "pinky"];

function serverUrl(): string {
  const param = new URLSearchParams(window.location.search).get("server");
  if (param) {
    return param;
  }
  const scheme = window.location.protocol === "https:" ? "wss" : "ws";
  return `${scheme}://${window.location.host}/ws`;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

let vm: ViewModel = initialViewModel();
const sliders: Record<Hand, number[]> = { left: [0, 0, 0, 0, 0], right: [0, 0, 0, 0, 0] };
const throttle: Record<Hand, GloveThrottle> = { left: new GloveThrottle(), right: new GloveThrottle() };
let selectedHand: Hand = "right";

const connection = new SessionConnection(
  serverUrl(),
  {
    onMessage(msg) {
      vm = reduce(vm, msg);
      render();
    },
    onStatus(status, detail) {
      vm = connectionChanged(vm, status, detail ?? "");
      render();
    },
    onProtocolFault(detail) {
      vm = { ...vm, errors: [...vm.errors, `protocol: ${detail}`].slice(-8) };
      render();
    },
  },
  browserTransportFactory,
);

function sendGlove(hand: Hand): void {
  const calibration = vm.calibration?.[hand];
  if (!calibration || !throttle[hand].ready(performance.now())) {
    return;
  }
  connection.send(
    "glove_frame",
    gloveFramePayload(
      hand,
      sliders[hand],
      calibration,
      { position: [0.3, hand === "left" ? 0.2 : -0.2, 0.3], rotvec: [0, 0, 0] },
      vm.tick / 25,
    ),
  );
}

function renderTaxonomy(): void {
  const tree = el<HTMLDivElement>("taxonomy");
  tree.innerHTML = "";
  for (const top of vm.taxonomy) {
    const topNode = document.createElement("div");
    topNode.className = "tax-top";
    topNode.textContent = top.top;
    tree.appendChild(topNode);
    for (const sub of top.subs) {
      const subNode = document.createElement("div");
      subNode.className = "tax-sub";
      subNode.textContent = sub.sub;
      tree.appendChild(subNode);
      for (const entry of sub.entries) {
        const button = document.createElement("button");
        button.className = "tax-entry";
        button.textContent = entry.name;
        button.title = `${entry.id}: ${entry.attributes.purpose}`;
        if (vm.hands[selectedHand].active_type === entry.id) {
          button.classList.add("active");
        }
        button.onclick = () => connection.send("select_type", { type_id: entry.id, hand: selectedHand });
        tree.appendChild(button);
      }
    }
  }
}

function renderGauges(): void {
  for (const hand of HANDS) {
    const container = el<HTMLDivElement>(`gauges-${hand}`);
    container.innerHTML = "";
    for (const finger of FINGERS) {
      const ratio = vm.hands[hand].ratios[finger] ?? 0;
      const row = document.createElement("div");
      row.className = "gauge";
      const label = document.createElement("span");
      label.textContent = finger;
      const bar = document.createElement("div");
      bar.className = "gauge-bar";
      const fill = document.createElement("div");
      fill.className = "gauge-fill";
      fill.style.width = `${(ratio * 100).toFixed(1)}%`;
      bar.appendChild(fill);
      const value = document.createElement("span");
      value.className = "gauge-value";
      value.textContent = ratio.toFixed(2);
      row.append(label, bar, value);
      container.appendChild(row);
    }
  }
}

function renderPlan(): void {
  const panel = el<HTMLDivElement>("plan");
  if (!vm.plan) {
    panel.textContent = "no plan";
    return;
  }
  panel.innerHTML = "";
  const heading = document.createElement("div");
  heading.className = "plan-head";
  heading.textContent = vm.plan.requestText
    ? `${vm.plan.requestText} (${vm.plan.source}${vm.plan.applied ? ", applied" : ""})`
    : "active plan";
  panel.appendChild(heading);
  vm.plan.steps.forEach((step, i) => {
    const row = document.createElement("div");
    row.className = "plan-step";
    row.textContent = `${i + 1}. ${step.description} [L: ${step.left_type ?? "-"} | R: ${step.right_type ?? "-"}]`;
    const apply = document.createElement("button");
    apply.textContent = "apply";
    apply.onclick = () => {
      if (step.left_type) {
        connection.send("select_type", { type_id: step.left_type, hand: "left" });
      }
      if (step.right_type) {
        connection.send("select_type", { type_id: step.right_type, hand: "right" });
      }
    };
    row.appendChild(apply);
    panel.appendChild(row);
  });
}

function render(): void {
  const banner = el<HTMLDivElement>("banner");
  banner.dataset.status = vm.connection;
  banner.textContent =
    vm.connection === "connected"
      ? `connected | mode: ${vm.mode} | tick ${vm.tick}${vm.recording ? " | REC" : ""}`
      : `${vm.connection}${vm.statusDetail ? `: ${vm.statusDetail}` : ""}`;

  for (const hand of HANDS) {
    el<HTMLSpanElement>(`badge-${hand}`).textContent = vm.hands[hand].active_type ?? "none";
    const canvas = el<HTMLCanvasElement>(`skeleton-${hand}`);
    const ctx = canvas.getContext("2d");
    if (ctx) {
      drawSkeleton(ctx, vm.hands[hand].skeleton, "xz", canvas.width, canvas.height);
    }
  }
  renderTaxonomy();
  renderGauges();
  renderPlan();
  el<HTMLDivElement>("errors").innerHTML = vm.errors
    .slice(-4)
    .map((e) => `<div class="toast">${e}</div>`)
    .join("");
}

function wireControls(): void {
  el<HTMLSelectElement>("hand-select").onchange = (event) => {
    selectedHand = (event.target as HTMLSelectElement).value as Hand;
    render();
  };

  const sliderBox = el<HTMLDivElement>("sliders");
  FINGERS.forEach((finger, i) => {
    const row = document.createElement("div");
    row.className = "slider-row";
    const label = document.createElement("label");
    label.textContent = finger;
    const input = document.createElement("input");
    input.type = "range";
    input.min = "0";
    input.max = "1";
    input.step = "0.01";
    input.value = "0";
    input.oninput = () => {
      sliders[selectedHand][i] = Number(input.value);
      sendGlove(selectedHand);
    };
    row.append(label, input);
    sliderBox.appendChild(row);
  });

  el<HTMLButtonElement>("reset").onclick = () => connection.send("select_type", { type_id: null });
  el<HTMLButtonElement>("teach-start").onclick = () =>
    connection.send("teach_control", { action: "start", hand: selectedHand });
  el<HTMLButtonElement>("teach-stop").onclick = () => connection.send("teach_control", { action: "stop" });
  el<HTMLButtonElement>("mark-stretch").onclick = () =>
    connection.send("teach_control", { action: "mark_stretch" });
  el<HTMLButtonElement>("mark-contract").onclick = () =>
    connection.send("teach_control", { action: "mark_contract" });

  el<HTMLFormElement>("command-form").onsubmit = (event) => {
    event.preventDefault();
    const input = el<HTMLInputElement>("command-input");
    if (input.value.trim()) {
      connection.send("command_text", { text: input.value.trim() });
      input.value = "";
    }
  };

  // Fingertip nudges: +-1 mm per press along the chosen axis.
  const fingerPick = el<HTMLSelectElement>("nudge-finger");
  for (const [axis, index] of [["x", 0], ["y", 1], ["z", 2]] as const) {
    for (const sign of [1, -1]) {
      const button = el<HTMLButtonElement>(`nudge-${axis}${sign > 0 ? "plus" : "minus"}`);
      button.onclick = () => {
        const translation = [0, 0, 0];
        translation[index] = sign * 0.001;
        connection.send("adjust_fingertip", {
          hand: selectedHand,
          finger: fingerPick.value,
          translation,
          rotation: [0, 0, 0],
        });
      };
    }
  }

  el<HTMLFormElement>("transform-form").onsubmit = (event) => {
    event.preventDefault();
    const raw = el<HTMLInputElement>("transform-input").value.trim();
    const parts = raw.split(/[\s,]+/).map(Number);
    if (parts.length !== 6 || parts.some((v) => !Number.isFinite(v))) {
      vm = { ...vm, errors: [...vm.errors, "transform entry needs 6 numbers: dx dy dz rx ry rz"].slice(-8) };
      render();
      return;
    }
    connection.send("adjust_fingertip", {
      hand: selectedHand,
      finger: fingerPick.value,
      translation: parts.slice(0, 3),
      rotation: parts.slice(3),
    });
  };
}

wireControls();
render();
connection.connect();
