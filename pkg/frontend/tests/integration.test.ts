/** Full workbench loop against the real service on a synthetic fixture
 * library: select base -> rank -> flip role (order changes on asymmetric
 * data) -> render -> fetch playable audio; threshold slider endpoints give
 * all-singleton and single-cluster groupings.
 *
 * Playback itself needs a browser; here "audible" is verified by decoding
 * the WAV header and checking a nonzero duration, plus a Range request of
 * the kind a seeking <audio> element issues. */

import { spawn, spawnSync, type ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, otherRole } from "../src/api.js";
import { groupClusters } from "../src/heatmap.js";
import { JobPoller } from "../src/poll.js";
import { WorkbenchStore } from "../src/state.js";

const PYTHON = process.env.STEMWELD_PYTHON ?? "python3";

let workdir: string;
let service: ChildProcess | null = null;
let client: ApiClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const addr = srv.address();
      if (addr === null || typeof addr === "string") {
        reject(new Error("no port"));
        return;
      }
      srv.close(() => resolve(addr.port));
    });
  });
}

async function waitForService(base: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${base}/api/library`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error("service did not come up");
    await new Promise((r) => setTimeout(r, 250));
  }
}

beforeAll(async () => {
  workdir = mkdtempSync(join(tmpdir(), "stemweld-ui-"));
  const libDir = join(workdir, "lib");
  const made = spawnSync(PYTHON, ["-c",
    `from stemweld.fixtures import make_demo_library; make_demo_library(${JSON.stringify(libDir)}, n_songs=4)`,
  ], { encoding: "utf-8" });
  if (made.status !== 0) {
    throw new Error(`fixture library failed: ${made.stderr}`);
  }
  const port = await freePort();
  service = spawn(PYTHON, ["-m", "stemweld.service", "--library", libDir,
                           "--port", String(port)],
                  { stdio: ["ignore", "pipe", "pipe"] });
  const base = `http://127.0.0.1:${port}`;
  client = new ApiClient(base);
  await waitForService(base);
}, 60_000);

afterAll(() => {
  service?.kill();
  rmSync(workdir, { recursive: true, force: true });
});

describe("workbench loop", () => {
  it("completes select -> rank -> flip -> render -> playable audio", async () => {
    const store = new WorkbenchStore();

    // library
    store.setTracks(await client.library());
    expect(store.state.tracks).toHaveLength(4);

    // select base, rank donors
    store.selectBase(store.state.tracks[0]!.id);
    const base = store.state.selectedBase!;
    const first = await client.rank(base, store.state.baseRole,
                                    store.state.selectedSource);
    store.setRanking(first.candidates);
    expect(store.state.ranking!.length).toBe(3);
    const firstScores = first.candidates.map((c) => c.score);
    expect(firstScores).toEqual([...firstScores].sort((a, b) => b - a));

    // flip role: asymmetric fixture, the scores change
    store.setRole(otherRole(store.state.baseRole));
    expect(store.state.ranking).toBeNull();
    const flipped = await client.rank(base, store.state.baseRole,
                                      store.state.selectedSource);
    store.setRanking(flipped.candidates);
    expect(flipped.candidates.map((c) => c.score)).not.toEqual(firstScores);

    // pick the top candidate and render
    const donor = store.state.ranking![0]!.song_id;
    expect(store.selectDonor(donor)).toBe(true);
    const { job_id } = await client.submitMashup({
      base,
      donor,
      donor_role: otherRole(store.state.baseRole),
      overrides: { semitones: 0 },
    });
    store.jobSubmitted(job_id);
    const poller = new JobPoller(client, 100);
    const final = await poller.start(job_id, (s) => store.jobUpdate(s));
    expect(final?.state).toBe("done");
    expect(store.state.jobState).toBe("done");

    // plan summary drives the UI read-back
    const plan = store.state.planSummary!;
    expect(plan.semitone_shift).toBe(0);
    expect(plan.overrides).toContainEqual(["semitones", 0]);
    expect(plan.pairings.length).toBeGreaterThan(0);

    // audio: full fetch parses as WAV with nonzero duration
    const resp = await fetch(client.audioUrl(job_id));
    expect(resp.status).toBe(200);
    expect(resp.headers.get("content-type")).toBe("audio/wav");
    const bytes = new Uint8Array(await resp.arrayBuffer());
    expect(wavDuration(bytes)).toBeGreaterThan(1.0);

    // a seeking player issues Range requests
    const partial = await fetch(client.audioUrl(job_id),
                                { headers: { Range: "bytes=44-4443" } });
    expect(partial.status).toBe(206);
    expect((await partial.arrayBuffer()).byteLength).toBe(4400);
  });

  it("threshold slider endpoints: singletons then one cluster", async () => {
    const sources = await client.sources();
    const model = sources.embedding_models[0]!;
    const zero = await client.clusters(model, 0);
    expect(zero.n_clusters).toBe(zero.items.length);
    expect(groupClusters(zero).every((g) => g.length === 1)).toBe(true);
    const all = await client.clusters(model, 2);
    expect(all.n_clusters).toBe(1);
    expect(groupClusters(all)).toHaveLength(1);
  });

  it("matrix payload feeds the heatmap with asymmetry stats", async () => {
    const matrix = await client.matrix("cocola");
    expect(matrix.song_ids).toHaveLength(4);
    expect(matrix.values[0]![0]).toBeNull();
    expect(matrix.asymmetry.mean_abs_diff).toBeGreaterThan(0);
  });
});

/** Duration in seconds from a RIFF/WAVE byte buffer (fmt + data chunks). */
function wavDuration(bytes: Uint8Array): number {
  const view = new DataView(bytes.buffer, bytes.byteOffset, bytes.byteLength);
  if (bytes.length < 44) return 0;
  const tag = (o: number) => String.fromCharCode(...bytes.subarray(o, o + 4));
  if (tag(0) !== "RIFF" || tag(8) !== "WAVE") return 0;
  let pos = 12;
  let byteRate = 0;
  let dataLen = 0;
  while (pos + 8 <= bytes.length) {
    const id = tag(pos);
    const size = view.getUint32(pos + 4, true);
    if (id === "fmt ") byteRate = view.getUint32(pos + 16, true);
    if (id === "data") dataLen = size;
    pos += 8 + size + (size % 2);
  }
  return byteRate > 0 ? dataLen / byteRate : 0;
}
