// Canvas capture: box-filter an RGBA canvas down to the 28x28 grayscale
// vector the service expects. The drawing surface must be an integer
// multiple of 28 per side; background is 0, ink is 1.

export const GRID = 28;
export const PIXELS = GRID * GRID;

/** Average the red channel of an RGBA buffer over scale x scale blocks.
 * Drawings are grayscale white-on-black, so red carries the intensity. */
export function rasterize(rgba: Uint8ClampedArray, width: number, height: number): number[] {
  if (width !== height) {
    throw new Error(`drawing surface must be square, got ${width}x${height}`);
  }
  if (width % GRID !== 0) {
    throw new Error(`surface side ${width} is not a multiple of ${GRID}`);
  }
  if (rgba.length !== width * height * 4) {
    throw new Error(`buffer length ${rgba.length} does not match ${width}x${height} RGBA`);
  }
  const scale = width / GRID;
  const out = new Array<number>(PIXELS).fill(0);
  for (let gy = 0; gy < GRID; gy++) {
    for (let gx = 0; gx < GRID; gx++) {
      let sum = 0;
      for (let dy = 0; dy < scale; dy++) {
        for (let dx = 0; dx < scale; dx++) {
          const px = (gy * scale + dy) * width + gx * scale + dx;
          sum += rgba[px * 4];
        }
      }
      out[gy * GRID + gx] = sum / (scale * scale * 255);
    }
  }
  return out;
}

/** Paint a 784-vector back into an RGBA buffer at an integer scale. */
export function paintPixels(pixels: readonly number[], scale: number): Uint8ClampedArray {
  if (pixels.length !== PIXELS) {
    throw new Error(`expected ${PIXELS} pixels, got ${pixels.length}`);
  }
  const side = GRID * scale;
  const rgba = new Uint8ClampedArray(side * side * 4);
  for (let y = 0; y < side; y++) {
    for (let x = 0; x < side; x++) {
      const v = Math.round(pixels[Math.floor(y / scale) * GRID + Math.floor(x / scale)] * 255);
      const o = (y * side + x) * 4;
      rgba[o] = rgba[o + 1] = rgba[o + 2] = v;
      rgba[o + 3] = 255;
    }
  }
  return rgba;
}
