import { describe, expect, it } from "vitest";

import { decodeRle, encodeRle, maskArea } from "../src/rle.js";

describe("rle codec", () => {
    it("decodes an all-background mask", () => {
        const mask = decodeRle({ h: 2, w: 2, counts: [4] });
        expect(Array.from(mask)).toEqual([0, 0, 0, 0]);
    });

    it("decodes a leading foreground run", () => {
        const mask = decodeRle({ h: 2, w: 2, counts: [0, 4] });
        expect(Array.from(mask)).toEqual([1, 1, 1, 1]);
    });

    it("decodes an interior run", () => {
        const mask = decodeRle({ h: 1, w: 4, counts: [1, 2, 1] });
        expect(Array.from(mask)).toEqual([0, 1, 1, 0]);
    });

    it("rejects a bad counts sum", () => {
        expect(() => decodeRle({ h: 2, w: 2, counts: [3] })).toThrow(/counts/);
    });

    it("round trips random masks", () => {
        let seed = 12345;
        const random = () => {
            seed = (seed * 1103515245 + 12345) & 0x7fffffff;
            return seed / 0x7fffffff;
        };
        for (let trial = 0; trial < 50; trial++) {
            const h = 1 + Math.floor(random() * 20);
            const w = 1 + Math.floor(random() * 20);
            const mask = new Uint8Array(h * w);
            for (let i = 0; i < mask.length; i++) mask[i] = random() < 0.5 ? 1 : 0;
            const decoded = decodeRle(encodeRle(mask, h, w));
            expect(Array.from(decoded)).toEqual(Array.from(mask));
        }
    });

    it("counts mask area", () => {
        expect(maskArea(decodeRle({ h: 1, w: 4, counts: [1, 2, 1] }))).toBe(2);
    });
});
