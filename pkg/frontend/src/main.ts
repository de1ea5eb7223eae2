/** Mashup workbench: library browser, per-role ranking, render configuration
 * with job tracking and playback, and the directed-matrix explorer. */

import { ApiClient, ApiError, otherRole } from "./api.js";
import type { ClustersResponse, Role, TrackInfo } from "./api.js";
import { drawHeatmap, groupClusters } from "./heatmap.js";
import { JobPoller } from "./poll.js";
import { WorkbenchStore } from "./state.js";

declare global {
  interface Window {
    STEMWELD_SERVICE_URL?: string;
  }
}

const SERVICE_URL = window.STEMWELD_SERVICE_URL ?? "http://127.0.0.1:8237";
const client = new ApiClient(SERVICE_URL);
const store = new WorkbenchStore();
const poller = new JobPoller(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

const banner = el<HTMLDivElement>("banner");
const libraryBody = el<HTMLTableSectionElement>("library-body");
const rankStatus = el<HTMLDivElement>("rank-status");
const rankList = el<HTMLOListElement>("rank-list");
const sourceSelect = el<HTMLSelectElement>("source-select");
const roleButtons = el<HTMLDivElement>("role-buttons");
const configSummary = el<HTMLDivElement>("config-summary");
const semitonesInput = el<HTMLInputElement>("semitones-input");
const tempoInput = el<HTMLInputElement>("tempo-input");
const donorGainInput = el<HTMLInputElement>("donor-gain-input");
const baseGainInput = el<HTMLInputElement>("base-gain-input");
const renderButton = el<HTMLButtonElement>("render-button");
const jobStatusBox = el<HTMLDivElement>("job-status");
const player = el<HTMLAudioElement>("player");
const planBox = el<HTMLDivElement>("plan-summary");
const matrixSource = el<HTMLSelectElement>("matrix-source");
const heatmapCanvas = el<HTMLCanvasElement>("heatmap");
const asymmetryBox = el<HTMLDivElement>("asymmetry");
const thresholdSlider = el<HTMLInputElement>("threshold-slider");
const thresholdValue = el<HTMLSpanElement>("threshold-value");
const clusterBox = el<HTMLDivElement>("clusters");

// ---------------------------------------------------------------------------
// Library panel

async function loadLibrary(): Promise<void> {
  try {
    store.setTracks(await client.library());
  } catch (err) {
    store.setConnectionError(err instanceof Error ? err.message : String(err));
  }
}

function renderBanner(): void {
  const msg = store.state.connectionError;
  banner.hidden = msg === null;
  if (msg !== null) {
    banner.replaceChildren();
    const text = document.createElement("span");
    text.textContent = `Service unreachable: ${msg} `;
    const retry = document.createElement("button");
    retry.textContent = "Retry";
    retry.addEventListener("click", () => void loadLibrary());
    banner.append(text, retry);
  }
}

function renderLibrary(): void {
  const { tracks, selectedBase } = store.state;
  libraryBody.replaceChildren();
  if (tracks.length === 0 && store.state.connectionError === null) {
    const row = libraryBody.insertRow();
    const cell = row.insertCell();
    cell.colSpan = 5;
    cell.className = "empty";
    cell.textContent = "Library is empty.";
    return;
  }
  for (const t of tracks) {
    const row = libraryBody.insertRow();
    row.className = t.id === selectedBase ? "selected" : "";
    const segs = summarizeSegments(t);
    for (const text of [t.id, `${t.key.tonic} ${t.key.mode}`,
                        t.bpm.toFixed(0), formatDuration(t.duration), segs]) {
      row.insertCell().textContent = text;
    }
    row.addEventListener("click", () => {
      store.selectBase(t.id);
      void refreshRanking();
    });
  }
}

function summarizeSegments(t: TrackInfo): string {
  const counts = new Map<string, number>();
  for (const label of t.segments) counts.set(label, (counts.get(label) ?? 0) + 1);
  return [...counts.entries()]
    .map(([label, n]) => (n > 1 ? `${label}x${n}` : label))
    .join(", ");
}

function formatDuration(seconds: number): string {
  const m = Math.floor(seconds / 60);
  const s = Math.round(seconds - m * 60);
  return `${m}:${String(s).padStart(2, "0")}`;
}

// ---------------------------------------------------------------------------
// Ranking panel (one in-flight request; stale responses dropped)

let rankRequest = 0;

async function refreshRanking(): Promise<void> {
  const { selectedBase, baseRole, selectedSource } = store.state;
  if (selectedBase === null) return;
  const ticket = ++rankRequest;
  try {
    const resp = await client.rank(selectedBase, baseRole, selectedSource);
    if (ticket === rankRequest) store.setRanking(resp.candidates);
  } catch (err) {
    if (ticket !== rankRequest) return;
    store.setRankingError(err instanceof ApiError ? err.message : String(err));
  }
}

function renderRanking(): void {
  const { selectedBase, baseRole, ranking, rankingError, selectedDonor } = store.state;
  for (const btn of roleButtons.querySelectorAll("button")) {
    btn.classList.toggle("active", btn.dataset.role === baseRole);
  }
  rankList.replaceChildren();
  if (selectedBase === null) {
    rankStatus.textContent = "Pick a base song from the library to rank donors.";
    return;
  }
  if (rankingError !== null) {
    rankStatus.textContent = `No ranking: ${rankingError}`;
    return;
  }
  if (ranking === null) {
    rankStatus.textContent = "Loading ranking...";
    return;
  }
  rankStatus.textContent =
    `Donors for ${selectedBase} keeping its ${baseRole} ` +
    `(donors supply ${otherRole(baseRole)}):`;
  for (const entry of ranking) {
    const item = document.createElement("li");
    item.textContent = `${entry.song_id}  -  ${entry.score.toFixed(4)}`;
    item.classList.toggle("selected", entry.song_id === selectedDonor);
    item.addEventListener("click", () => {
      store.selectDonor(entry.song_id);
    });
    rankList.append(item);
  }
}

// ---------------------------------------------------------------------------
// Configure-and-render panel

function readOverrides(): void {
  store.setOverrides({
    semitones: semitonesInput.value === "" ? null : Number(semitonesInput.value),
    tempoRatio: tempoInput.value === "" ? null : Number(tempoInput.value),
    donorGain: donorGainInput.value === "" ? 1 : Number(donorGainInput.value),
    baseGain: baseGainInput.value === "" ? 1 : Number(baseGainInput.value),
  });
}

async function submitRender(): Promise<void> {
  const { selectedBase, selectedDonor, baseRole, overrides } = store.state;
  if (selectedBase === null || selectedDonor === null) return;
  poller.cancel();
  try {
    const { job_id } = await client.submitMashup({
      base: selectedBase,
      donor: selectedDonor,
      donor_role: otherRole(baseRole),
      allow_self: selectedBase === selectedDonor,
      overrides: {
        semitones: overrides.semitones,
        tempo_ratio: overrides.tempoRatio,
        donor_gain: overrides.donorGain,
        base_gain: overrides.baseGain,
      },
    });
    store.jobSubmitted(job_id);
    const final = await poller.start(job_id, (s) => store.jobUpdate(s));
    if (final?.state === "done") {
      player.src = client.audioUrl(job_id);
      player.hidden = false;
    }
  } catch (err) {
    store.setConnectionError(err instanceof Error ? err.message : String(err));
  }
}

function renderConfig(): void {
  const { selectedBase, selectedDonor, baseRole, jobState, jobError, planSummary } =
    store.state;
  renderButton.disabled = selectedBase === null || selectedDonor === null;
  configSummary.textContent = selectedBase === null
    ? "No base selected."
    : selectedDonor === null
      ? `Base ${selectedBase} (${baseRole}); pick a donor from the ranking.`
      : `${selectedDonor} ${otherRole(baseRole)} onto ${selectedBase} ${baseRole}`;

  if (jobState === null) {
    jobStatusBox.textContent = "";
  } else if (jobState === "failed") {
    jobStatusBox.textContent = `Render failed: ${jobError ?? "unknown error"}`;
  } else {
    jobStatusBox.textContent = `Render ${jobState}`;
  }
  if (jobState !== "done") player.hidden = true;

  planBox.replaceChildren();
  if (planSummary !== null) {
    const shift = document.createElement("div");
    shift.textContent = `Key shift: ${planSummary.semitone_shift >= 0 ? "+" : ""}` +
      `${planSummary.semitone_shift} semitones` +
      (planSummary.overrides.length
        ? ` (overrides: ${planSummary.overrides.map(([k, v]) => `${k}=${v}`).join(", ")})`
        : "");
    planBox.append(shift);
    const list = document.createElement("ul");
    for (const p of planSummary.pairings) {
      const li = document.createElement("li");
      li.textContent = p.fill === "donor_repeat"
        ? `${p.label}: donor looped (${p.n_placements} placement${p.n_placements === 1 ? "" : "s"})`
        : `${p.label}: base only (no matching donor segment)`;
      list.append(li);
    }
    planBox.append(list);
  }
}

// ---------------------------------------------------------------------------
// Matrix + clusters panel (its own fetch guards)

let matrixRequest = 0;
let clusterRequest = 0;

async function refreshMatrix(): Promise<void> {
  const ticket = ++matrixRequest;
  try {
    const matrix = await client.matrix(matrixSource.value);
    if (ticket !== matrixRequest) return;
    drawHeatmap(heatmapCanvas, matrix);
    const a = matrix.asymmetry;
    asymmetryBox.textContent =
      `asymmetry: mean |d| ${a.mean_abs_diff.toFixed(4)}, ` +
      `max |d| ${a.max_abs_diff.toFixed(4)}, ` +
      `frobenius ${a.frobenius_index.toFixed(4)}`;
  } catch (err) {
    if (ticket !== matrixRequest) return;
    asymmetryBox.textContent =
      err instanceof ApiError ? err.message : String(err);
    const ctx = heatmapCanvas.getContext("2d");
    ctx?.clearRect(0, 0, heatmapCanvas.width, heatmapCanvas.height);
  }
}

async function refreshClusters(): Promise<void> {
  const model = clusterModel();
  const threshold = Number(thresholdSlider.value);
  thresholdValue.textContent = threshold.toFixed(2);
  if (model === null) {
    clusterBox.textContent = "Clustering needs an embedding source.";
    return;
  }
  const ticket = ++clusterRequest;
  try {
    const resp = await client.clusters(model, threshold);
    if (ticket !== clusterRequest) return;
    renderClusters(resp);
  } catch (err) {
    if (ticket !== clusterRequest) return;
    clusterBox.textContent = err instanceof ApiError ? err.message : String(err);
  }
}

function clusterModel(): string | null {
  // cocola is pairwise-only; clustering applies to embedding sources
  return matrixSource.value === "cocola" ? null : matrixSource.value;
}

function renderClusters(resp: ClustersResponse): void {
  clusterBox.replaceChildren();
  const head = document.createElement("div");
  head.textContent = `${resp.n_clusters} cluster${resp.n_clusters === 1 ? "" : "s"} ` +
    `at distance threshold ${resp.threshold.toFixed(2)}`;
  clusterBox.append(head);
  for (const group of groupClusters(resp)) {
    const div = document.createElement("div");
    div.className = "cluster-group";
    div.textContent = group.join(", ");
    clusterBox.append(div);
  }
}

// ---------------------------------------------------------------------------
// Wiring

async function loadSources(): Promise<void> {
  try {
    const { sources, embedding_models } = await client.sources();
    fillSelect(sourceSelect, sources, store.state.selectedSource);
    const matrixChoices = sources.length ? sources : ["cocola"];
    fillSelect(matrixSource, matrixChoices, matrixChoices[0] ?? "cocola");
    if (embedding_models.length && matrixChoices.includes(embedding_models[0]!)) {
      matrixSource.value = embedding_models[0]!;
    }
  } catch {
    fillSelect(sourceSelect, ["cocola"], "cocola");
    fillSelect(matrixSource, ["cocola"], "cocola");
  }
}

function fillSelect(select: HTMLSelectElement, options: string[],
                    selected: string): void {
  select.replaceChildren();
  for (const name of options) {
    const opt = document.createElement("option");
    opt.value = name;
    opt.textContent = name;
    select.append(opt);
  }
  if (options.includes(selected)) select.value = selected;
  if (select === sourceSelect) store.setSource(select.value);
}

export function start(): void {
  store.subscribe(() => {
    renderBanner();
    renderLibrary();
    renderRanking();
    renderConfig();
  });

  for (const role of ["vocals", "accompaniment"] as Role[]) {
    const btn = document.createElement("button");
    btn.dataset.role = role;
    btn.textContent = `base keeps ${role}`;
    btn.addEventListener("click", () => {
      store.setRole(role);
      void refreshRanking();
    });
    roleButtons.append(btn);
  }

  sourceSelect.addEventListener("change", () => {
    store.setSource(sourceSelect.value);
    void refreshRanking();
  });
  for (const input of [semitonesInput, tempoInput, donorGainInput, baseGainInput]) {
    input.addEventListener("change", readOverrides);
  }
  renderButton.addEventListener("click", () => void submitRender());
  matrixSource.addEventListener("change", () => {
    void refreshMatrix();
    void refreshClusters();
  });
  thresholdSlider.addEventListener("input", () => void refreshClusters());

  void loadLibrary();
  void loadSources().then(() => {
    void refreshMatrix();
    void refreshClusters();
  });
}

start();
