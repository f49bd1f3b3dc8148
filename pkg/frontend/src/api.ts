/** Typed client for the annotation service HTTP endpoints. */

import type { RleMask } from "./rle.js";

export interface DatasetListing {
    root: string;
    images: string[];
    modalities: { name: string; channels: number }[];
}

export interface SurfaceSnapshot {
    id: number;
    clicks_used: number;
    locked: boolean;
    iou: number;
    mask: RleMask;
    clicks: { y: number; x: number; positive: boolean }[];
}

export interface SessionSnapshot {
    session_id: string;
    image_id: string;
    height: number;
    width: number;
    surface_count: number;
    current_surface: number;
    avg_iou: number;
    theta_iou: number;
    theta_avg: number;
    n_max: number;
    surfaces: SurfaceSnapshot[];
}

export interface ClickResult {
    mask: RleMask;
    changed: RleMask;
    iou: number;
    avg_iou: number;
    clicks_used: number;
}

export interface CreatedSession {
    session_id: string;
    surfaces: number[];
    height: number;
    width: number;
}

export class ApiError extends Error {
    constructor(public status: number, detail: string) {
        super(detail);
    }
}

export class ApiClient {
    constructor(private base: string = "") {}

    private async call<T>(path: string, init?: RequestInit): Promise<T> {
        const response = await fetch(this.base + path, init);
        if (!response.ok) {
            let detail = response.statusText;
            try {
                const body = await response.json();
                if (body.detail) detail = String(body.detail);
            } catch {
                // non-JSON error body; keep the status text
            }
            throw new ApiError(response.status, detail);
        }
        return (await response.json()) as T;
    }

    private post<T>(path: string, body?: unknown): Promise<T> {
        return this.call<T>(path, {
            method: "POST",
            headers: { "content-type": "application/json" },
            body: body === undefined ? "{}" : JSON.stringify(body),
        });
    }

    listDatasets(): Promise<DatasetListing> {
        return this.call("/api/datasets");
    }

    createSession(imageId: string, predictor?: string): Promise<CreatedSession> {
        return this.post("/api/sessions", { image_id: imageId, predictor: predictor ?? null });
    }

    postClick(sessionId: string, surface: number, y: number, x: number,
              positive: boolean): Promise<ClickResult> {
        return this.post(`/api/sessions/${sessionId}/clicks`, { surface, y, x, positive });
    }

    undo(sessionId: string): Promise<SessionSnapshot> {
        return this.post(`/api/sessions/${sessionId}/undo`);
    }

    selectWorst(sessionId: string): Promise<{ surface: number; iou: number }> {
        return this.post(`/api/sessions/${sessionId}/select-worst`);
    }

    getState(sessionId: string): Promise<SessionSnapshot> {
        return this.call(`/api/sessions/${sessionId}/state`);
    }

    imageUrl(imageId: string, layer: "rgb" | "gt" | { modality: string }): string {
        if (layer === "rgb") return `${this.base}/api/images/${imageId}/rgb.png`;
        if (layer === "gt") return `${this.base}/api/images/${imageId}/gt.png`;
        return `${this.base}/api/images/${imageId}/modality/${layer.modality}.png`;
    }
}
