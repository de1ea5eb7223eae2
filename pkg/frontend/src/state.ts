/** Workbench state: a pure function of server responses plus local
 * selections. The store enforces the selection invariants (donor only after
 * base, active job only after a submission). */

import type { JobState, JobStatus, PlanSummary, RankEntry, Role, TrackInfo } from "./api.js";

export interface Overrides {
  semitones: number | null;
  tempoRatio: number | null;
  donorGain: number;
  baseGain: number;
}

export interface WorkbenchState {
  tracks: TrackInfo[];
  connectionError: string | null;
  selectedBase: string | null;
  baseRole: Role;
  selectedSource: string;
  selectedDonor: string | null;
  ranking: RankEntry[] | null;
  rankingError: string | null;
  overrides: Overrides;
  activeJob: string | null;
  jobState: JobState | null;
  jobError: string | null;
  planSummary: PlanSummary | null;
}

export function initialState(): WorkbenchState {
  return {
    tracks: [],
    connectionError: null,
    selectedBase: null,
    baseRole: "accompaniment",
    selectedSource: "cocola",
    selectedDonor: null,
    ranking: null,
    rankingError: null,
    overrides: { semitones: null, tempoRatio: null, donorGain: 1, baseGain: 1 },
    activeJob: null,
    jobState: null,
    jobError: null,
    planSummary: null,
  };
}

type Listener = (state: Readonly<WorkbenchState>) => void;

export class WorkbenchStore {
  private current = initialState();
  private listeners = new Set<Listener>();

  get state(): Readonly<WorkbenchState> {
    return this.current;
  }

  subscribe(fn: Listener): () => void {
    this.listeners.add(fn);
    return () => {
      this.listeners.delete(fn);
    };
  }

  private update(patch: Partial<WorkbenchState>): void {
    this.current = { ...this.current, ...patch };
    for (const fn of this.listeners) fn(this.current);
  }

  setTracks(tracks: TrackInfo[]): void {
    this.update({ tracks, connectionError: null });
  }

  setConnectionError(message: string): void {
    this.update({ connectionError: message });
  }

  /** Choosing a base resets everything downstream of it. */
  selectBase(songId: string): void {
    this.update({
      selectedBase: songId,
      selectedDonor: null,
      ranking: null,
      rankingError: null,
    });
  }

  setRole(role: Role): void {
    if (role === this.current.baseRole) return;
    this.update({ baseRole: role, ranking: null });
  }

  setSource(source: string): void {
    if (source === this.current.selectedSource) return;
    this.update({ selectedSource: source, ranking: null, rankingError: null });
  }

  setRanking(entries: RankEntry[]): void {
    this.update({ ranking: entries, rankingError: null });
  }

  setRankingError(message: string): void {
    this.update({ ranking: null, rankingError: message });
  }

  /** Donor is selectable only once a base is chosen. */
  selectDonor(songId: string): boolean {
    if (this.current.selectedBase === null) return false;
    this.update({ selectedDonor: songId });
    return true;
  }

  setOverrides(patch: Partial<Overrides>): void {
    this.update({ overrides: { ...this.current.overrides, ...patch } });
  }

  jobSubmitted(jobId: string): void {
    this.update({
      activeJob: jobId,
      jobState: "queued",
      jobError: null,
      planSummary: null,
    });
  }

  jobUpdate(status: JobStatus): void {
    if (status.job_id !== this.current.activeJob) return; // stale poll
    this.update({
      jobState: status.state,
      jobError: status.error ?? null,
      planSummary: status.plan ?? null,
    });
  }
}
