/** Client-side palette state: one entry per registered brush. */

import type { PaletteEntry, RgbColor, TargetSpec } from "./types.js";

export const ALPHA_SOFT_FLOOR = 0.95; // below this, warn: skips early steps fast
export const SIGMA_MAX = 64;

export interface KnobCheck {
  value: number;
  warning?: string;
}

export function clampAlpha(value: number): KnobCheck {
  const clamped = Math.min(1, Math.max(0, value));
  if (clamped < ALPHA_SOFT_FLOOR) {
    return {
      value: clamped,
      warning: `alpha below ${ALPHA_SOFT_FLOOR} makes the brush skip early steps quickly; recommended > ${ALPHA_SOFT_FLOOR}`,
    };
  }
  return { value: clamped };
}

export function clampSigma(value: number): KnobCheck {
  return { value: Math.min(SIGMA_MAX, Math.max(0, value)) };
}

export function clampStrength(value: number): KnobCheck {
  return { value: Math.min(1, Math.max(0, value)) };
}

const SWATCHES: RgbColor[] = [
  { r: 0xf8, g: 0x9e, b: 0x12 },
  { r: 0xf9, g: 0x2f, b: 0x6c },
  { r: 0x26, g: 0x92, b: 0xf3 },
  { r: 0x16, g: 0xc2, b: 0x32 },
  { r: 0xac, g: 0x6a, b: 0xeb },
  { r: 0x92, g: 0xc6, b: 0x2c },
];

export class PaletteStore {
  private entries = new Map<number, PaletteEntry>();
  activeId = 0;

  constructor() {
    // The background always exists, with a full, locked mask.
    this.entries.set(0, {
      id: 0,
      name: "background",
      swatch: { r: 0xee, g: 0xee, b: 0xee },
      target: { kind: "color", color: { r: 1, g: 1, b: 1 } },
      alpha: 1,
      blurSigma: 0,
      strength: 1,
      background: true,
    });
  }

  list(): PaletteEntry[] {
    return [...this.entries.values()].sort((a, b) => a.id - b.id);
  }

  get(id: number): PaletteEntry {
    const entry = this.entries.get(id);
    if (!entry) throw new Error(`no palette entry with id ${id}`);
    return entry;
  }

  get size(): number {
    return this.entries.size;
  }

  add(id: number, name: string, target: TargetSpec): PaletteEntry {
    if (this.entries.has(id)) throw new Error(`palette entry ${id} already exists`);
    const entry: PaletteEntry = {
      id,
      name,
      swatch: SWATCHES[(id - 1) % SWATCHES.length],
      target,
      alpha: 1,
      blurSigma: 0,
      strength: 1,
      background: false,
    };
    this.entries.set(id, entry);
    this.activeId = id;
    return entry;
  }

  remove(id: number): void {
    if (this.get(id).background) throw new Error("the background entry is fixed");
    this.entries.delete(id);
    if (this.activeId === id) this.activeId = 0;
  }

  /** Cosmetic only; the stream is not touched. */
  rename(id: number, name: string): void {
    this.get(id).name = name;
  }

  setAlpha(id: number, value: number): KnobCheck {
    const check = clampAlpha(value);
    this.get(id).alpha = check.value;
    return check;
  }

  setSigma(id: number, value: number): KnobCheck {
    const check = clampSigma(value);
    this.get(id).blurSigma = check.value;
    return check;
  }

  setStrength(id: number, value: number): KnobCheck {
    const check = clampStrength(value);
    this.get(id).strength = check.value;
    return check;
  }

  setTarget(id: number, target: TargetSpec): void {
    this.get(id).target = target;
  }
}
