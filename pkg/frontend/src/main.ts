// Browser entry point: wires the native WebSocket to the session store and
// paints the panels at the display refresh (well above the 10 Hz floor).

import { ConsoleClient, Transport } from "./connection.js";
import { CLASS_LABELS, DriveCommand } from "./protocol.js";
import {
  bandPowerPanel,
  chairGlyph,
  confidencePanel,
  connectionStatus,
  cueCard,
  worldToCanvas,
} from "./render.js";
import { ConsoleSession } from "./session.js";

const CHANNELS = [
  "Fp1", "Fp2", "F7", "F3", "F4", "F8", "T3",
  "C3", "C4", "T4", "P3", "P4", "O1", "O2",
];
const BANDS = ["Delta", "Theta", "Alpha", "Beta", "Gamma"];
const THRESHOLD = 0.6;
const WORLD = { xMin: -5, yMin: -5, xMax: 5, yMax: 5 };

function browserWsTransport(url: string): Promise<Transport> {
  return new Promise((resolve, reject) => {
    const ws = new WebSocket(url);
    let lineCb: (line: string) => void = () => {};
    let closeCb: () => void = () => {};
    let errorCb: (err: Error) => void = () => {};
    let buf = "";
    ws.onopen = () =>
      resolve({
        send: (data) => ws.send(data),
        close: () => ws.close(),
        onLine: (cb) => (lineCb = cb),
        onClose: (cb) => (closeCb = cb),
        onError: (cb) => (errorCb = cb),
      });
    ws.onmessage = (ev) => {
      buf += String(ev.data);
      let nl: number;
      while ((nl = buf.indexOf("\n")) >= 0) {
        const line = buf.slice(0, nl);
        buf = buf.slice(nl + 1);
        if (line.trim()) lineCb(line);
      }
    };
    ws.onerror = () => {
      errorCb(new Error("websocket error"));
      reject(new Error("websocket error"));
    };
    ws.onclose = () => closeCb();
  });
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

export function startApp(): void {
  const session = new ConsoleSession();
  const addrInput = el<HTMLInputElement>("address");
  const client = new ConsoleClient(session, () => browserWsTransport(addrInput.value));

  el<HTMLButtonElement>("connect").onclick = () => void client.connect();
  el<HTMLButtonElement>("train").onclick = () => client.startTraining();
  el<HTMLButtonElement>("abort").onclick = () => client.abortTraining();
  el<HTMLButtonElement>("stop").onclick = () => client.stop();
  for (const [id, cmd] of [
    ["fwd", "Forward"],
    ["back", "Backward"],
    ["left", "TurnLeft"],
    ["right", "TurnRight"],
  ] as [string, DriveCommand][]) {
    el<HTMLButtonElement>(id).onclick = () => client.override(cmd);
  }
  document.addEventListener("keydown", (ev) => {
    const map: Record<string, DriveCommand> = {
      ArrowUp: "Forward",
      ArrowDown: "Backward",
      ArrowLeft: "TurnLeft",
      ArrowRight: "TurnRight",
      " ": "Stop",
    };
    const cmd = map[ev.key];
    if (cmd) client.override(cmd);
  });

  const worldCanvas = el<HTMLCanvasElement>("world");
  const confCanvas = el<HTMLCanvasElement>("confidence");
  const bandCanvas = el<HTMLCanvasElement>("bands");

  function paint(): void {
    const status = connectionStatus(session);
    const statusEl = el<HTMLSpanElement>("status");
    statusEl.textContent = status.text;
    statusEl.className = status.kind;

    // manual controls are disabled while disconnected (no message is sent)
    const connected = session.connected;
    for (const id of ["train", "abort", "stop", "fwd", "back", "left", "right"]) {
      el<HTMLButtonElement>(id).disabled = !connected;
    }

    paintCue();
    paintWorld();
    paintConfidence();
    paintBands();
    paintLog();
    requestAnimationFrame(paint);
  }

  function paintCue(): void {
    const card = cueCard(session, Date.now());
    const cueEl = el<HTMLDivElement>("cue");
    if (card) {
      const pct = card.progress === null ? "" : ` ${(card.progress * 100).toFixed(0)}%`;
      cueEl.textContent = `${card.label} — trial ${card.trial + 1}/${card.total}${pct}`;
      cueEl.style.display = "block";
    } else if (session.training.phase === "complete" && session.training.report) {
      cueEl.textContent = `training complete — CV accuracy ${session.training.report.accuracy.toFixed(3)}`;
      cueEl.style.display = "block";
    } else {
      cueEl.style.display = "none";
    }
  }

  function paintWorld(): void {
    const ctx = worldCanvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = worldCanvas;
    ctx.clearRect(0, 0, width, height);
    ctx.strokeStyle = "#888";
    ctx.strokeRect(0, 0, width, height);
    const glyph = chairGlyph(session);
    if (!glyph) return;
    ctx.strokeStyle = glyph.stale ? "#bbb" : "#4a90d9";
    ctx.beginPath();
    for (const [i, p] of glyph.trail.entries()) {
      const { px, py } = worldToCanvas(p.x, p.y, WORLD, width, height);
      if (i === 0) ctx.moveTo(px, py);
      else ctx.lineTo(px, py);
    }
    ctx.stroke();
    const { px, py } = worldToCanvas(glyph.x, glyph.y, WORLD, width, height);
    ctx.save();
    ctx.translate(px, py);
    ctx.rotate(glyph.rotationRad); // clockwise on screen = clockwise heading
    ctx.fillStyle = glyph.collided ? "#d94a4a" : glyph.stale ? "#bbb" : "#2a6";
    ctx.beginPath(); // triangle pointing "up" = heading direction
    ctx.moveTo(0, -10);
    ctx.lineTo(6, 8);
    ctx.lineTo(-6, 8);
    ctx.closePath();
    ctx.fill();
    ctx.restore();
    el<HTMLSpanElement>("mode").textContent =
      `${glyph.mode}${glyph.collided ? " (collided)" : ""}${glyph.stale ? " [stale]" : ""}`;
  }

  function paintConfidence(): void {
    const ctx = confCanvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = confCanvas;
    ctx.clearRect(0, 0, width, height);
    const panel = confidencePanel(session, THRESHOLD);
    const barW = width / panel.bars.length;
    panel.bars.forEach((bar, i) => {
      const h = bar.value * (height - 18);
      ctx.fillStyle = panel.stale ? "#ccc" : bar.aboveThreshold ? "#2a6" : "#4a90d9";
      ctx.fillRect(i * barW + 4, height - 14 - h, barW - 8, h);
      ctx.fillStyle = "#333";
      ctx.font = "11px sans-serif";
      ctx.fillText(bar.label, i * barW + 4, height - 2);
    });
    const yTheta = height - 14 - panel.threshold * (height - 18);
    ctx.strokeStyle = "#d94a4a";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(0, yTheta);
    ctx.lineTo(width, yTheta);
    ctx.stroke();
    ctx.setLineDash([]);
  }

  function paintBands(): void {
    const ctx = bandCanvas.getContext("2d");
    if (!ctx) return;
    const { width, height } = bandCanvas;
    ctx.clearRect(0, 0, width, height);
    const panel = bandPowerPanel(session, CHANNELS);
    const cellW = (width - 40) / BANDS.length;
    const cellH = (height - 16) / CHANNELS.length;
    panel.rows.forEach((row, r) => {
      ctx.fillStyle = "#333";
      ctx.font = "9px sans-serif";
      ctx.fillText(row.channel, 2, 12 + r * cellH + cellH * 0.7);
      row.cells.forEach((v, c) => {
        const shade = panel.stale ? 230 : Math.round(240 - v * 180);
        ctx.fillStyle = `rgb(${shade},${shade},255)`;
        ctx.fillRect(40 + c * cellW, 14 + r * cellH, cellW - 2, cellH - 2);
      });
    });
    BANDS.forEach((b, c) => {
      ctx.fillStyle = "#333";
      ctx.fillText(b, 40 + c * cellW, 10);
    });
  }

  function paintLog(): void {
    const logEl = el<HTMLPreElement>("log");
    logEl.textContent = session.log
      .slice(-12)
      .map((e) => `${new Date(e.atMs).toLocaleTimeString()} ${e.level === "error" ? "! " : ""}${e.text}`)
      .join("\n");
  }

  requestAnimationFrame(paint);
}

if (typeof document !== "undefined" && document.getElementById("connect")) {
  startApp();
}
