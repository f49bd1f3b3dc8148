/** Shared palette: surface index -> RGB, plus the modality colormap. */

export type Rgb = [number, number, number];

export const SURFACE_COLORS: Rgb[] = [
    [231, 76, 60],   // red
    [52, 152, 219],  // blue
    [46, 204, 113],  // green
    [241, 196, 15],  // yellow
    [155, 89, 182],  // purple
    [26, 188, 156],  // teal
    [230, 126, 34],  // orange
    [149, 165, 166], // gray
];

export const CONFLICT_COLOR: Rgb = [255, 0, 255];

export function surfaceColor(surface: number): Rgb {
    return SURFACE_COLORS[(surface - 1) % SURFACE_COLORS.length];
}

/** Fixed blue->green->yellow ramp for single-channel modality rasters. */
export function colormap(value: number): Rgb {
    const t = Math.min(1, Math.max(0, value / 255));
    if (t < 0.5) {
        const u = t * 2;
        return [Math.round(48 * u), Math.round(104 + 100 * u), Math.round(142 - 60 * u)];
    }
    const u = (t - 0.5) * 2;
    return [Math.round(48 + 205 * u), Math.round(204 + 27 * u), Math.round(82 - 50 * u)];
}

export function applyColormap(gray: Uint8ClampedArray, pixels: number): Uint8ClampedArray {
    const out = new Uint8ClampedArray(pixels * 4);
    for (let i = 0; i < pixels; i++) {
        const [r, g, b] = colormap(gray[i * 4]); // grayscale png: r == g == b
        out[i * 4] = r;
        out[i * 4 + 1] = g;
        out[i * 4 + 2] = b;
        out[i * 4 + 3] = 255;
    }
    return out;
}
