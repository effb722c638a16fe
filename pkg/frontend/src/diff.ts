// Pixel-level comparison of a drawing and the coach's proposal: which pixels
// need ink added, which need ink removed.

import { GRID, PIXELS } from "./rasterize.js";

export type PixelMark = "add" | "remove" | "keep";

export const DIFF_THRESHOLD = 0.1;

export const ADD_COLOR: [number, number, number] = [64, 220, 96];     // green: draw here
export const REMOVE_COLOR: [number, number, number] = [235, 80, 80]; // red: lift the pen

/** Classify every pixel of (input, proposal) against the threshold. */
export function diffMarks(
  input: readonly number[],
  proposal: readonly number[],
  threshold: number = DIFF_THRESHOLD,
): PixelMark[] {
  if (input.length !== PIXELS || proposal.length !== PIXELS) {
    throw new Error(`both images must have ${PIXELS} pixels`);
  }
  const marks = new Array<PixelMark>(PIXELS);
  for (let i = 0; i < PIXELS; i++) {
    const delta = proposal[i] - input[i];
    marks[i] = delta > threshold ? "add" : delta < -threshold ? "remove" : "keep";
  }
  return marks;
}

export function countMarks(marks: readonly PixelMark[]): { add: number; remove: number } {
  let add = 0;
  let remove = 0;
  for (const m of marks) {
    if (m === "add") add++;
    else if (m === "remove") remove++;
  }
  return { add, remove };
}

/** Render the overlay: dimmed input with add/remove pixels in two colors. */
export function diffOverlayRgba(
  input: readonly number[],
  marks: readonly PixelMark[],
  scale: number,
): Uint8ClampedArray {
  const side = GRID * scale;
  const rgba = new Uint8ClampedArray(side * side * 4);
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      const i = Math.floor(y / scale) * GRID + Math.floor(x / scale);
      const o = (y * side + x) * 4;
      if (marks[i] === "add") {
        [rgba[o], rgba[o + 1], rgba[o + 2]] = ADD_COLOR;
      } else if (marks[i] === "remove") {
        [rgba[o], rgba[o + 1], rgba[o + 2]] = REMOVE_COLOR;
      } else {
        const v = Math.round(input[i] * 140); // dimmed backdrop
        rgba[o] = rgba[o + 1] = rgba[o + 2] = v;
      }
      rgba[o + 3] = 255;
    }
  }
  return rgba;
}
