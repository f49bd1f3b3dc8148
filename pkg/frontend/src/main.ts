/** Canvas application: image picker, click dispatch, overlay rendering,
 *  live metrics panel. Left mouse button places a positive click, right
 *  button a negative one; masks always come back from the server. */

import { ApiClient, ApiError, type SessionSnapshot } from "./api.js";
import { applyColormap } from "./colors.js";
import { composeOverlay, surfacesFromSnapshot } from "./overlay.js";
import { decodeRle } from "./rle.js";
import {
    applySnapshot,
    cycleSurface,
    enqueueClick,
    initialState,
    isLocked,
    metricsRows,
    selectSurface,
    setChanged,
    setOverlayMode,
    totalClicks,
    type OverlayMode,
    type PendingClick,
    type ViewState,
} from "./state.js";

const SCALE = 8;

const api = new ApiClient("");
let state: ViewState = initialState();
let sessionId: string | null = null;
let requestInFlight = false;
let underlays: Partial<Record<string, Uint8ClampedArray>> = {};

const canvas = document.getElementById("view") as HTMLCanvasElement;
const context = canvas.getContext("2d")!;
const imageSelect = document.getElementById("image-select") as HTMLSelectElement;
const modeSelect = document.getElementById("mode-select") as HTMLSelectElement;
const metricsBody = document.getElementById("metrics-body") as HTMLTableSectionElement;
const noticeBox = document.getElementById("notice") as HTMLDivElement;
const avgIouBox = document.getElementById("avg-iou") as HTMLSpanElement;
const totalClicksBox = document.getElementById("total-clicks") as HTMLSpanElement;
const surfaceBox = document.getElementById("active-surface") as HTMLSpanElement;

function setState(next: ViewState) {
    state = next;
    render();
}

function notice(text: string) {
    noticeBox.textContent = text;
    noticeBox.classList.add("visible");
    window.setTimeout(() => noticeBox.classList.remove("visible"), 2500);
}

async function loadUnderlay(kind: string, url: string): Promise<void> {
    const image = new Image();
    image.src = url;
    await image.decode();
    const scratch = document.createElement("canvas");
    scratch.width = image.naturalWidth;
    scratch.height = image.naturalHeight;
    const sctx = scratch.getContext("2d")!;
    sctx.drawImage(image, 0, 0);
    const data = sctx.getImageData(0, 0, scratch.width, scratch.height).data;
    underlays[kind] = kind.startsWith("modality:")
        ? applyColormap(data, scratch.width * scratch.height)
        : new Uint8ClampedArray(data);
}

function activeUnderlay(): Uint8ClampedArray | null {
    if (state.overlayMode === "ground-truth") return underlays["gt"] ?? null;
    if (state.overlayMode === "modality" && state.modality) {
        return underlays[`modality:${state.modality}`] ?? null;
    }
    return underlays["rgb"] ?? null;
}

function render() {
    const snapshot = state.snapshot;
    if (!snapshot) return;
    const { width, height } = snapshot;
    const mode = state.overlayMode === "single-mask" ? "single-mask" : "joint-mask";
    const result = composeOverlay({
        width,
        height,
        underlay: activeUnderlay(),
        surfaces: surfacesFromSnapshot(snapshot.surfaces),
        mode,
        activeSurface: state.activeSurface,
        changed: state.changed ? decodeRle(state.changed) : null,
        pending: state.pending,
    });
    const scratch = document.createElement("canvas");
    scratch.width = width;
    scratch.height = height;
    const pixels = new Uint8ClampedArray(result.rgba); // fresh ArrayBuffer for ImageData
    scratch.getContext("2d")!.putImageData(new ImageData(pixels, width, height), 0, 0);
    canvas.width = width * SCALE;
    canvas.height = height * SCALE;
    context.imageSmoothingEnabled = false;
    context.drawImage(scratch, 0, 0, canvas.width, canvas.height);

    surfaceBox.textContent = String(state.activeSurface);
    avgIouBox.textContent = snapshot.avg_iou.toFixed(1);
    totalClicksBox.textContent = String(totalClicks(state));
    metricsBody.replaceChildren(
        ...metricsRows(state).map((row) => {
            const tr = document.createElement("tr");
            if (row.surface === state.activeSurface) tr.classList.add("active");
            if (row.locked) tr.classList.add("locked");
            const cells = [
                `${row.surface}${row.worst ? " *" : ""}`,
                String(row.clicks),
                row.iou.toFixed(1),
                row.locked ? "locked" : "open",
            ];
            tr.replaceChildren(...cells.map((text) => {
                const td = document.createElement("td");
                td.textContent = text;
                return td;
            }));
            tr.addEventListener("click", () => setState(selectSurface(state, row.surface)));
            return tr;
        }),
    );
    if (state.notice) notice(state.notice);
}

async function refresh(): Promise<void> {
    if (!sessionId) return;
    const snapshot = await api.getState(sessionId);
    setState(applySnapshot(state, snapshot));
}

async function pumpClicks(): Promise<void> {
    // at most one in-flight request; the rest of the queue waits locally
    if (requestInFlight || !sessionId || state.pending.length === 0) return;
    requestInFlight = true;
    const click = state.pending[0];
    try {
        const result = await api.postClick(sessionId, click.surface, click.y, click.x,
                                           click.positive);
        setState(setChanged(state, result.changed));
        await refresh();
    } catch (error) {
        setState({ ...state, pending: [] });
        notice(error instanceof ApiError ? error.message : String(error));
    } finally {
        requestInFlight = false;
    }
    void pumpClicks();
}

function dispatchClick(event: MouseEvent, positive: boolean) {
    event.preventDefault();
    if (!state.snapshot) return;
    const bounds = canvas.getBoundingClientRect();
    const x = Math.floor((event.clientX - bounds.left) / bounds.width * state.snapshot.width);
    const y = Math.floor((event.clientY - bounds.top) / bounds.height * state.snapshot.height);
    if (y < 0 || x < 0 || y >= state.snapshot.height || x >= state.snapshot.width) return;
    const click: PendingClick = { surface: state.activeSurface, y, x, positive };
    if (isLocked(state, click.surface)) {
        notice(`surface ${click.surface} used its click budget`);
        return;
    }
    setState(enqueueClick(state, click));
    void pumpClicks();
}

async function openSession(nextImage: string): Promise<void> {
    underlays = {};
    const created = await api.createSession(nextImage);
    sessionId = created.session_id;
    const listing = await api.listDatasets();
    const jobs = [
        loadUnderlay("rgb", api.imageUrl(nextImage, "rgb")),
        loadUnderlay("gt", api.imageUrl(nextImage, "gt")),
        ...listing.modalities.map((m) =>
            loadUnderlay(`modality:${m.name}`, api.imageUrl(nextImage, { modality: m.name }))),
    ];
    await Promise.allSettled(jobs); // missing layers degrade to RGB-only
    state = initialState();
    if (listing.modalities.length) state.modality = listing.modalities[0].name;
    await refresh();
}

async function boot(): Promise<void> {
    const listing = await api.listDatasets();
    imageSelect.replaceChildren(...listing.images.map((id) => {
        const option = document.createElement("option");
        option.value = id;
        option.textContent = id;
        return option;
    }));
    imageSelect.addEventListener("change", () => void openSession(imageSelect.value));

    canvas.addEventListener("click", (event) => dispatchClick(event, true));
    canvas.addEventListener("contextmenu", (event) => dispatchClick(event, false));

    modeSelect.addEventListener("change", () =>
        setState(setOverlayMode(state, modeSelect.value as OverlayMode)));

    document.getElementById("btn-worst")!.addEventListener("click", async () => {
        if (!sessionId) return;
        try {
            const worst = await api.selectWorst(sessionId);
            setState(selectSurface(state, worst.surface));
        } catch (error) {
            notice(error instanceof ApiError ? error.message : String(error));
        }
    });
    document.getElementById("btn-undo")!.addEventListener("click", async () => {
        if (!sessionId) return;
        try {
            const snapshot: SessionSnapshot = await api.undo(sessionId);
            setState(setChanged(applySnapshot(state, snapshot), null));
        } catch (error) {
            notice(error instanceof ApiError ? error.message : String(error));
        }
    });

    document.addEventListener("keydown", (event) => {
        if (event.key === "]") setState(cycleSurface(state, 1));
        if (event.key === "[") setState(cycleSurface(state, -1));
        if (event.key === "u") document.getElementById("btn-undo")!.dispatchEvent(new Event("click"));
        if (event.key === "w") document.getElementById("btn-worst")!.dispatchEvent(new Event("click"));
    });

    if (listing.images.length) {
        imageSelect.value = listing.images[0];
        await openSession(listing.images[0]);
    }
}

void boot();
