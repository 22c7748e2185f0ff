/**
 * Heatmap recoloring of the API's 8-bit grayscale map PNGs.
 *
 * The service encodes each map as level = round((v - min) / (max - min) * 255)
 * plus the raw min/max. Recoloring maps each of the 256 levels to a unique
 * color of a perceptually-uniform ramp (bijective, no client-side clipping),
 * and min/max label the color scale so values stay traceable to the API.
 */

// viridis anchor points (r, g, b in 0..255)
const ANCHORS: ReadonlyArray<readonly [number, number, number]> = [
  [68, 1, 84],
  [71, 19, 101],
  [72, 36, 117],
  [70, 52, 128],
  [66, 67, 135],
  [61, 82, 139],
  [56, 96, 140],
  [51, 109, 142],
  [46, 122, 143],
  [42, 135, 142],
  [38, 148, 139],
  [37, 160, 135],
  [41, 172, 129],
  [53, 183, 121],
  [73, 194, 110],
  [98, 203, 95],
  [127, 211, 78],
  [159, 218, 58],
  [192, 223, 37],
  [225, 226, 26],
  [253, 231, 37],
] as const;

function lerp(a: number, b: number, t: number): number {
  return a + (b - a) * t;
}

/**
 * 256-entry color lookup table; entry i is the color of level i.
 *
 * Interpolation rounding can collide neighboring entries, so a deterministic
 * nudge pass keeps all 256 colors distinct: the level -> color map must stay
 * bijective for overlays to be invertible.
 */
export function viridisLut(): Array<[number, number, number]> {
  const lut: Array<[number, number, number]> = [];
  const seen = new Set<string>();
  const segments = ANCHORS.length - 1;
  for (let level = 0; level < 256; level++) {
    const pos = (level / 255) * segments;
    const idx = Math.min(Math.floor(pos), segments - 1);
    const t = pos - idx;
    const lo = ANCHORS[idx]!;
    const hi = ANCHORS[idx + 1]!;
    let color: [number, number, number] = [
      Math.round(lerp(lo[0], hi[0], t)),
      Math.round(lerp(lo[1], hi[1], t)),
      Math.round(lerp(lo[2], hi[2], t)),
    ];
    for (const [dr, dg, db] of NUDGES) {
      const candidate: [number, number, number] = [
        clamp8(color[0] + dr),
        clamp8(color[1] + dg),
        clamp8(color[2] + db),
      ];
      if (!seen.has(candidate.join(','))) {
        color = candidate;
        break;
      }
    }
    seen.add(color.join(','));
    lut.push(color);
  }
  return lut;
}

const NUDGES: ReadonlyArray<readonly [number, number, number]> = (() => {
  const out: Array<[number, number, number]> = [[0, 0, 0]];
  for (let d = 1; d <= 4; d++) {
    out.push([0, 0, d], [0, 0, -d], [0, d, 0], [0, -d, 0], [d, 0, 0], [-d, 0, 0]);
  }
  return out;
})();

function clamp8(x: number): number {
  return Math.min(255, Math.max(0, x));
}

let cachedLut: Array<[number, number, number]> | null = null;

export function levelColor(level: number): [number, number, number] {
  if (level < 0 || level > 255 || !Number.isInteger(level)) {
    throw new Error(`level must be an integer in [0, 255], got ${level}`);
  }
  if (!cachedLut) cachedLut = viridisLut();
  return cachedLut[level]!;
}

/**
 * Recolor grayscale level data into RGBA.
 *
 * `levels` holds one 0..255 level per pixel (e.g. decoded PNG luminance);
 * `opacity` in [0, 1] fills the alpha channel uniformly.
 */
export function recolorLevels(levels: Uint8Array | Uint8ClampedArray, opacity: number) {
  if (opacity < 0 || opacity > 1) {
    throw new Error(`opacity must be in [0, 1], got ${opacity}`);
  }
  const alpha = Math.round(opacity * 255);
  const out = new Uint8ClampedArray(levels.length * 4);
  for (let i = 0; i < levels.length; i++) {
    const [r, g, b] = levelColor(levels[i]!);
    out[i * 4] = r;
    out[i * 4 + 1] = g;
    out[i * 4 + 2] = b;
    out[i * 4 + 3] = alpha;
  }
  return out;
}

/** Human-readable color-scale caption for one map payload. */
export function scaleCaption(min: number, max: number): string {
  const fmt = (x: number) => (Math.abs(x) >= 100 ? x.toFixed(1) : x.toPrecision(4));
  return min === max ? `constant ${fmt(min)}` : `${fmt(min)} .. ${fmt(max)}`;
}

/**
 * Draw a base image with a recolored heatmap overlay onto a canvas.
 * Browser-only; all pure math lives in the functions above.
 */
export async function drawOverlay(
  canvas: HTMLCanvasElement,
  baseImageUrl: string,
  mapPngBase64: string,
  opacity: number,
): Promise<void> {
  const ctx = canvas.getContext('2d');
  if (!ctx) throw new Error('canvas 2d context unavailable');
  const [base, overlay] = await Promise.all([
    loadImage(baseImageUrl),
    loadImage(`data:image/png;base64,${mapPngBase64}`),
  ]);
  canvas.width = base.naturalWidth;
  canvas.height = base.naturalHeight;
  ctx.drawImage(base, 0, 0);

  // decode levels by rendering the grayscale PNG offscreen
  const off = document.createElement('canvas');
  off.width = overlay.naturalWidth;
  off.height = overlay.naturalHeight;
  const offCtx = off.getContext('2d')!;
  offCtx.drawImage(overlay, 0, 0);
  const gray = offCtx.getImageData(0, 0, off.width, off.height);
  const levels = new Uint8Array(off.width * off.height);
  for (let i = 0; i < levels.length; i++) {
    levels[i] = gray.data[i * 4]!; // grayscale: R = G = B = level
  }
  const rgba = recolorLevels(levels, opacity);
  offCtx.putImageData(new ImageData(rgba, off.width, off.height), 0, 0);
  ctx.imageSmoothingEnabled = true;
  ctx.drawImage(off, 0, 0, canvas.width, canvas.height);
}

function loadImage(url: string): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    img.onload = () => resolve(img);
    img.onerror = () => reject(new Error(`failed to load ${url.slice(0, 64)}`));
    img.src = url;
  });
}
