/** Minimal binary P6 pixmap decoder; the service stores frames in this format. */

export interface DecodedImage {
  width: number;
  height: number;
  /** RGBA bytes, row-major, alpha fixed at 255 */
  rgba: Uint8ClampedArray;
}

export function decodePpm(buffer: ArrayBuffer): DecodedImage {
  const bytes = new Uint8Array(buffer);
  if (bytes.length < 2 || bytes[0] !== 0x50 || bytes[1] !== 0x36) {
    throw new Error('not a binary P6 pixmap');
  }
  let pos = 2;
  const fields: number[] = [];
  let current = '';
  let inComment = false;
  while (fields.length < 3) {
    if (pos >= bytes.length) throw new Error('truncated pixmap header');
    const ch = bytes[pos++];
    if (inComment) {
      if (ch === 0x0a || ch === 0x0d) inComment = false;
      continue;
    }
    if (ch === 0x23) {
      inComment = true;
      continue;
    }
    if (ch === 0x20 || ch === 0x09 || ch === 0x0a || ch === 0x0d) {
      if (current.length > 0) {
        fields.push(Number(current));
        current = '';
      }
      continue;
    }
    current += String.fromCharCode(ch);
  }
  const [width, height, maxval] = fields;
  if (!Number.isInteger(width) || !Number.isInteger(height) || maxval !== 255) {
    throw new Error(`unsupported pixmap header ${width}x${height}/${maxval}`);
  }
  const expected = width * height * 3;
  if (bytes.length - pos < expected) {
    throw new Error(`pixmap data truncated: need ${expected} bytes`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    rgba[4 * i] = bytes[pos + 3 * i];
    rgba[4 * i + 1] = bytes[pos + 3 * i + 1];
    rgba[4 * i + 2] = bytes[pos + 3 * i + 2];
    rgba[4 * i + 3] = 255;
  }
  return { width, height, rgba };
}
