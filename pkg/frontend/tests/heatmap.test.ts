import { describe, expect, it } from "vitest";

import type { ClustersResponse } from "../src/api.js";
import { cellColor, groupClusters, matrixRange } from "../src/heatmap.js";

describe("matrixRange", () => {
  it("ignores nulls and NaNs", () => {
    expect(matrixRange([[null, 0.2], [0.8, null]])).toEqual({ min: 0.2, max: 0.8 });
  });

  it("falls back for an all-null matrix", () => {
    expect(matrixRange([[null]])).toEqual({ min: 0, max: 1 });
  });
});

describe("cellColor", () => {
  it("renders null as the neutral colour", () => {
    expect(cellColor(null, 0, 1)).toBe("#3a3a42");
  });

  it("is cold at the minimum and warm at the maximum", () => {
    const lo = cellColor(0, 0, 1);
    const hi = cellColor(1, 0, 1);
    const [lr, , lb] = lo.match(/\d+/g)!.map(Number);
    const [hr, , hb] = hi.match(/\d+/g)!.map(Number);
    expect(lb).toBeGreaterThan(lr);
    expect(hr).toBeGreaterThan(hb);
  });

  it("clamps out-of-range values and handles a flat range", () => {
    expect(cellColor(5, 0, 1)).toBe(cellColor(1, 0, 1));
    expect(() => cellColor(0.5, 1, 1)).not.toThrow();
  });
});

describe("groupClusters", () => {
  const resp: ClustersResponse = {
    model: "clap",
    threshold: 0.5,
    linkage: "average",
    items: [["a", "vocals"], ["a", "accompaniment"], ["b", "vocals"]],
    labels: [0, 1, 0],
    n_clusters: 2,
  };

  it("groups items by label in label order", () => {
    expect(groupClusters(resp)).toEqual([
      ["a/vocals", "b/vocals"],
      ["a/accompaniment"],
    ]);
  });

  it("singletons map one group per item", () => {
    const singles = { ...resp, labels: [0, 1, 2], n_clusters: 3 };
    expect(groupClusters(singles)).toHaveLength(3);
  });
});
