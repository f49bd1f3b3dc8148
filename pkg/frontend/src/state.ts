/** Client view state: a pure function of the latest server snapshot plus
 *  in-flight optimistic markers. Masks are never mutated locally. */

import type { SessionSnapshot, SurfaceSnapshot } from "./api.js";
import type { RleMask } from "./rle.js";

export type OverlayMode = "single-mask" | "joint-mask" | "ground-truth" | "modality";

export interface PendingClick {
    surface: number;
    y: number;
    x: number;
    positive: boolean;
}

export interface ViewState {
    snapshot: SessionSnapshot | null;
    activeSurface: number;
    overlayMode: OverlayMode;
    modality: string | null;
    pending: PendingClick[];
    changed: RleMask | null;
    notice: string | null;
}

export function initialState(): ViewState {
    return {
        snapshot: null,
        activeSurface: 1,
        overlayMode: "joint-mask",
        modality: null,
        pending: [],
        changed: null,
        notice: null,
    };
}

export function applySnapshot(state: ViewState, snapshot: SessionSnapshot): ViewState {
    const active = Math.min(Math.max(state.activeSurface, 1), snapshot.surface_count);
    return { ...state, snapshot, activeSurface: active, pending: [], notice: null };
}

export function surfaceById(state: ViewState, surface: number): SurfaceSnapshot | null {
    return state.snapshot?.surfaces.find((s) => s.id === surface) ?? null;
}

export function isLocked(state: ViewState, surface: number): boolean {
    return surfaceById(state, surface)?.locked ?? false;
}

/** Guarded optimistic enqueue: locked surfaces reject the click locally. */
export function enqueueClick(state: ViewState, click: PendingClick): ViewState {
    if (isLocked(state, click.surface)) {
        return { ...state, notice: `surface ${click.surface} used its click budget` };
    }
    return { ...state, pending: [...state.pending, click], notice: null };
}

export function selectSurface(state: ViewState, surface: number): ViewState {
    const count = state.snapshot?.surface_count ?? 1;
    const wrapped = ((surface - 1 + count) % count) + 1;
    return { ...state, activeSurface: wrapped };
}

export function cycleSurface(state: ViewState, delta: number): ViewState {
    return selectSurface(state, state.activeSurface + delta);
}

export function setOverlayMode(state: ViewState, mode: OverlayMode): ViewState {
    return { ...state, overlayMode: mode };
}

export function setChanged(state: ViewState, changed: RleMask | null): ViewState {
    return { ...state, changed };
}

/** Per-surface click counters with the worst surface flagged, for the metrics panel. */
export function metricsRows(state: ViewState): {
    surface: number;
    clicks: number;
    iou: number;
    locked: boolean;
    worst: boolean;
}[] {
    const snapshot = state.snapshot;
    if (!snapshot) return [];
    const live = snapshot.surfaces.filter((s) => !(s.locked && s.iou < snapshot.theta_iou));
    const worst = live.length
        ? live.reduce((a, b) => (b.iou < a.iou || (b.iou === a.iou && b.id < a.id) ? b : a)).id
        : null;
    return snapshot.surfaces.map((s) => ({
        surface: s.id,
        clicks: s.clicks_used,
        iou: s.iou,
        locked: s.locked,
        worst: s.id === worst,
    }));
}

export function totalClicks(state: ViewState): number {
    return state.snapshot?.surfaces.reduce((sum, s) => sum + s.clicks_used, 0) ?? 0;
}
