/** Overlay compositing on raw RGBA buffers; pure and canvas-free so the
 *  pixel math is testable in node. */

import { CONFLICT_COLOR, surfaceColor, type Rgb } from "./colors.js";
import { decodeRle, type RleMask } from "./rle.js";
import type { PendingClick } from "./state.js";

export interface OverlaySurface {
    id: number;
    mask: Uint8Array; // h*w, 0/1
    clicks: { y: number; x: number; positive: boolean }[];
}

export interface OverlayInputs {
    width: number;
    height: number;
    underlay: Uint8ClampedArray | null; // RGBA, h*w*4; null degrades to dark ground
    surfaces: OverlaySurface[];
    mode: "single-mask" | "joint-mask";
    activeSurface: number;
    changed: Uint8Array | null; // conflict pixels from the last insert
    pending: PendingClick[];
    tint?: number; // mask alpha in [0, 1]
}

export interface OverlayResult {
    rgba: Uint8ClampedArray;
    /** surface id that tinted each pixel (0 = untinted); mirrors the joint grid */
    ownership: Uint8Array;
}

function blend(buffer: Uint8ClampedArray, index: number, color: Rgb, alpha: number) {
    for (let channel = 0; channel < 3; channel++) {
        const base = buffer[index * 4 + channel];
        buffer[index * 4 + channel] = Math.round(alpha * color[channel] + (1 - alpha) * base);
    }
    buffer[index * 4 + 3] = 255;
}

function drawMarker(
    buffer: Uint8ClampedArray, width: number, height: number,
    y: number, x: number, positive: boolean, color: Rgb,
) {
    const radius = 2;
    for (let dy = -radius; dy <= radius; dy++) {
        for (let dx = -radius; dx <= radius; dx++) {
            const r = y + dy;
            const c = x + dx;
            if (r < 0 || r >= height || c < 0 || c >= width) continue;
            const d2 = dy * dy + dx * dx;
            if (d2 > radius * radius) continue;
            // positive: filled disk; negative: 1px ring
            if (!positive && d2 < (radius - 1) * (radius - 1)) continue;
            blend(buffer, r * width + c, color, 1.0);
        }
    }
}

export function composeOverlay(inputs: OverlayInputs): OverlayResult {
    const pixels = inputs.width * inputs.height;
    const rgba = new Uint8ClampedArray(pixels * 4);
    if (inputs.underlay && inputs.underlay.length === pixels * 4) {
        rgba.set(inputs.underlay);
    } else {
        for (let i = 0; i < pixels; i++) {
            rgba[i * 4] = 24;
            rgba[i * 4 + 1] = 24;
            rgba[i * 4 + 2] = 28;
            rgba[i * 4 + 3] = 255;
        }
    }

    const ownership = new Uint8Array(pixels);
    const shown = inputs.mode === "single-mask"
        ? inputs.surfaces.filter((s) => s.id === inputs.activeSurface)
        : inputs.surfaces;
    const tint = inputs.tint ?? 0.45;
    for (const surface of shown) {
        const color = surfaceColor(surface.id);
        for (let i = 0; i < pixels; i++) {
            if (surface.mask[i]) {
                blend(rgba, i, color, tint);
                ownership[i] = surface.id;
            }
        }
    }

    if (inputs.changed) {
        for (let i = 0; i < pixels; i++) {
            if (inputs.changed[i]) blend(rgba, i, CONFLICT_COLOR, 0.6);
        }
    }

    for (const surface of shown) {
        const color = surfaceColor(surface.id);
        for (const click of surface.clicks) {
            drawMarker(rgba, inputs.width, inputs.height, click.y, click.x,
                       click.positive, click.positive ? color : [255, 255, 255]);
        }
    }
    for (const pending of inputs.pending) {
        if (inputs.mode === "single-mask" && pending.surface !== inputs.activeSurface) continue;
        drawMarker(rgba, inputs.width, inputs.height, pending.y, pending.x,
                   pending.positive, [255, 255, 0]); // optimistic marker, reconciled later
    }
    return { rgba, ownership };
}

export function surfacesFromSnapshot(
    surfaces: { id: number; mask: RleMask; clicks: { y: number; x: number; positive: boolean }[] }[],
): OverlaySurface[] {
    return surfaces.map((s) => ({ id: s.id, mask: decodeRle(s.mask), clicks: s.clicks }));
}

/** Pixels owned by one surface, as a 0/1 mask (for hash comparisons). */
export function ownershipMask(result: OverlayResult, surface: number): Uint8Array {
    const out = new Uint8Array(result.ownership.length);
    for (let i = 0; i < out.length; i++) {
        out[i] = result.ownership[i] === surface ? 1 : 0;
    }
    return out;
}
