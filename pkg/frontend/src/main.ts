// Wiring: a 280x280 drawing canvas, digit picker, submit button, and three
// result panels (your drawing, the coach's proposal, the difference overlay)
// with confidence bars for both sides.

import { requestProposal } from "./api.js";
import { DIFF_THRESHOLD, countMarks, diffMarks, diffOverlayRgba } from "./diff.js";
import { GRID, paintPixels, rasterize } from "./rasterize.js";
import { DrawingState } from "./state.js";

const SCALE = 10;
const SIDE = GRID * SCALE;
const SERVICE_URL = "";

const state = new DrawingState();

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const drawCanvas = el<HTMLCanvasElement>("draw");
const proposalCanvas = el<HTMLCanvasElement>("proposal");
const diffCanvas = el<HTMLCanvasElement>("diff");
const submitButton = el<HTMLButtonElement>("submit");
const clearButton = el<HTMLButtonElement>("clear");
const statusLine = el<HTMLParagraphElement>("status");
const labelRow = el<HTMLDivElement>("labels");
const metricsBox = el<HTMLDivElement>("metrics");

for (const canvas of [drawCanvas, proposalCanvas, diffCanvas]) {
  canvas.width = SIDE;
  canvas.height = SIDE;
}

const ctx = drawCanvas.getContext("2d", { willReadFrequently: true })!;
ctx.fillStyle = "black";
ctx.fillRect(0, 0, SIDE, SIDE);
ctx.strokeStyle = "white";
ctx.lineWidth = 20;
ctx.lineCap = "round";
ctx.lineJoin = "round";

let drawing = false;

function pointerPos(ev: PointerEvent): [number, number] {
  const rect = drawCanvas.getBoundingClientRect();
  return [
    ((ev.clientX - rect.left) / rect.width) * SIDE,
    ((ev.clientY - rect.top) / rect.height) * SIDE,
  ];
}

drawCanvas.addEventListener("pointerdown", (ev) => {
  drawing = true;
  const [x, y] = pointerPos(ev);
  ctx.beginPath();
  ctx.moveTo(x, y);
  ctx.lineTo(x + 0.01, y + 0.01);
  ctx.stroke();
});
drawCanvas.addEventListener("pointermove", (ev) => {
  if (!drawing) return;
  const [x, y] = pointerPos(ev);
  ctx.lineTo(x, y);
  ctx.stroke();
});
for (const evt of ["pointerup", "pointerleave"] as const) {
  drawCanvas.addEventListener(evt, () => {
    drawing = false;
  });
}

clearButton.addEventListener("click", () => {
  ctx.fillStyle = "black";
  ctx.fillRect(0, 0, SIDE, SIDE);
  statusLine.textContent = "canvas cleared";
});

for (let digit = 0; digit <= 9; digit++) {
  const button = document.createElement("button");
  button.textContent = String(digit);
  button.className = "label-btn";
  button.addEventListener("click", () => {
    state.setLabel(digit);
    for (const other of labelRow.querySelectorAll("button")) {
      other.classList.toggle("selected", other === button);
    }
    refreshSubmit();
  });
  labelRow.appendChild(button);
}

function refreshSubmit(): void {
  submitButton.disabled = !state.canSubmit();
  submitButton.title = state.canSubmit()
    ? "send the drawing to the coach"
    : "pick the digit you meant first";
}
refreshSubmit();

function paintToCanvas(canvas: HTMLCanvasElement, rgba: Uint8ClampedArray): void {
  const context = canvas.getContext("2d")!;
  const image = context.createImageData(SIDE, SIDE);
  image.data.set(rgba);
  context.putImageData(image, 0, 0);
}

function confidenceBar(label: string, value: number): string {
  const pct = (value * 100).toFixed(1);
  return `<div class="bar-row"><span>${label}</span>` +
    `<div class="bar"><div class="fill" style="width:${pct}%"></div></div>` +
    `<span>${pct}%</span></div>`;
}

function showAttempt(input: number[], proposal: number[],
                     metrics: Record<string, number>): void {
  paintToCanvas(proposalCanvas, paintPixels(proposal, SCALE));
  const marks = diffMarks(input, proposal, DIFF_THRESHOLD);
  paintToCanvas(diffCanvas, diffOverlayRgba(input, marks, SCALE));
  const counts = countMarks(marks);
  metricsBox.innerHTML =
    confidenceBar(`"${state.intendedLabel}" before`, metrics.input_confidence) +
    confidenceBar(`"${state.intendedLabel}" after`, metrics.proposal_confidence) +
    `<p class="legend"><span class="add-swatch"></span> add ink (${counts.add} px)
      <span class="remove-swatch"></span> remove ink (${counts.remove} px)</p>` +
    `<p>read as: ${metrics.predicted_input_class} before,
        ${metrics.predicted_proposal_class} after &middot;
        ink ${metrics.input_ink.toFixed(4)} &rarr; ${metrics.proposal_ink.toFixed(4)}
        &middot; change ${metrics.l1_change.toFixed(4)}</p>`;
}

submitButton.addEventListener("click", async () => {
  if (!state.canSubmit() || state.intendedLabel === null) return;
  const image = ctx.getImageData(0, 0, SIDE, SIDE);
  const pixels = rasterize(image.data, SIDE, SIDE);
  state.setDrawing(pixels);
  const tag = state.nextRequestTag();
  statusLine.textContent = "asking the coach...";
  submitButton.disabled = true;
  const result = await requestProposal(SERVICE_URL, pixels, state.intendedLabel);
  refreshSubmit();
  if (!state.isCurrent(tag)) {
    return; // a newer submission superseded this one
  }
  if (result.kind === "invalid") {
    statusLine.textContent = `rejected (${result.field}): ${result.message}`;
    return;
  }
  if (result.kind === "unavailable") {
    statusLine.textContent = `${result.message} - try again in a moment`;
    return;
  }
  const attempt = state.recordAttempt(pixels, result.response);
  statusLine.textContent = `attempt ${state.attempts.length} coached`;
  showAttempt(attempt.input, attempt.proposal,
              attempt.metrics as unknown as Record<string, number>);
});
