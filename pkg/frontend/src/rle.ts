/** Row-major run-length masks as used on the wire: runs alternate 0/1,
 *  starting with a (possibly zero-length) background run. */

export interface RleMask {
    h: number;
    w: number;
    counts: number[];
}

export function decodeRle(rle: RleMask): Uint8Array {
    const total = rle.counts.reduce((a, b) => a + b, 0);
    if (total !== rle.h * rle.w) {
        throw new Error(`RLE counts sum to ${total}, expected ${rle.h * rle.w}`);
    }
    const out = new Uint8Array(rle.h * rle.w);
    let offset = 0;
    let value = 0;
    for (const count of rle.counts) {
        if (value) {
            out.fill(1, offset, offset + count);
        }
        offset += count;
        value ^= 1;
    }
    return out;
}

export function encodeRle(mask: Uint8Array, h: number, w: number): RleMask {
    if (mask.length !== h * w) {
        throw new Error(`mask length ${mask.length} != ${h * w}`);
    }
    const counts: number[] = [];
    let value = 0;
    let run = 0;
    for (let i = 0; i < mask.length; i++) {
        const bit = mask[i] ? 1 : 0;
        if (bit === value) {
            run++;
        } else {
            counts.push(run);
            value = bit;
            run = 1;
        }
    }
    counts.push(run);
    return { h, w, counts };
}

export function maskArea(mask: Uint8Array): number {
    let area = 0;
    for (let i = 0; i < mask.length; i++) area += mask[i];
    return area;
}
