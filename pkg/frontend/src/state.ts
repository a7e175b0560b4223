import type { PlannerApi } from "./api.js";
import type { ItineraryRecord, PoiInfo, PredictBody } from "./types.js";

export const HISTORY_LIMIT = 20;

export interface HistoryEntry {
  id: number;
  request: PredictBody;
  response: ItineraryRecord;
}

export interface FieldErrors {
  source?: string;
  dest?: string;
  budget?: string;
}

export interface PlannerState {
  catalog: PoiInfo[];
  modelFingerprint: string | null;
  source: string | null;
  dest: string | null;
  budgetHours: number;
  pending: boolean;
  queued: PredictBody | null;
  itinerary: ItineraryRecord | null;
  shownHistoryId: number | null;
  error: string | null;
  fieldErrors: FieldErrors;
  history: HistoryEntry[];
  nextHistoryId: number;
}

export function initialState(): PlannerState {
  return {
    catalog: [],
    modelFingerprint: null,
    source: null,
    dest: null,
    budgetHours: 4,
    pending: false,
    queued: null,
    itinerary: null,
    shownHistoryId: null,
    error: null,
    fieldErrors: {},
    history: [],
    nextHistoryId: 1,
  };
}

/** Same rules the API enforces: distinct endpoints, positive budget. */
export function validate(state: PlannerState): FieldErrors {
  const errors: FieldErrors = {};
  if (!state.source) errors.source = "pick a starting POI";
  if (!state.dest) errors.dest = "pick a destination POI";
  if (state.source && state.dest && state.source === state.dest) {
    errors.dest = "destination must differ from the start";
  }
  if (!(state.budgetHours > 0)) errors.budget = "budget must be positive";
  return errors;
}

export function canSubmit(state: PlannerState): boolean {
  return Object.keys(validate(state)).length === 0;
}

export function setCatalog(
  state: PlannerState,
  catalog: PoiInfo[],
  modelFingerprint: string,
): PlannerState {
  // A fingerprint change means the model was reloaded: selections may point
  // at a stale catalog, so they reset (history is kept for reference).
  const changed = state.modelFingerprint !== null && state.modelFingerprint !== modelFingerprint;
  return {
    ...state,
    catalog,
    modelFingerprint,
    source: changed ? null : state.source,
    dest: changed ? null : state.dest,
    itinerary: changed ? null : state.itinerary,
    shownHistoryId: changed ? null : state.shownHistoryId,
  };
}

export function setSource(state: PlannerState, source: string | null): PlannerState {
  const next = { ...state, source };
  return { ...next, fieldErrors: validate(next) };
}

export function setDest(state: PlannerState, dest: string | null): PlannerState {
  const next = { ...state, dest };
  return { ...next, fieldErrors: validate(next) };
}

export function setBudgetHours(state: PlannerState, budgetHours: number): PlannerState {
  const next = { ...state, budgetHours };
  return { ...next, fieldErrors: validate(next) };
}

export function requestBody(state: PlannerState): PredictBody {
  if (!canSubmit(state)) throw new Error("request built from an invalid state");
  return {
    source: state.source as string,
    dest: state.dest as string,
    budget_s: state.budgetHours * 3600,
  };
}

export function beginRequest(state: PlannerState): PlannerState {
  return { ...state, pending: true, error: null };
}

/** Queue behind the in-flight request; the newest submission wins. */
export function queueRequest(state: PlannerState, body: PredictBody): PlannerState {
  return { ...state, queued: body };
}

export function completeRequest(
  state: PlannerState,
  request: PredictBody,
  response: ItineraryRecord,
): PlannerState {
  const entry: HistoryEntry = { id: state.nextHistoryId, request, response };
  return {
    ...state,
    pending: false,
    itinerary: response,
    shownHistoryId: entry.id,
    error: null,
    history: [entry, ...state.history].slice(0, HISTORY_LIMIT),
    nextHistoryId: state.nextHistoryId + 1,
  };
}

/** API failure: banner only, inputs and the last itinerary stay untouched. */
export function failRequest(state: PlannerState, message: string, field?: keyof FieldErrors): PlannerState {
  return {
    ...state,
    pending: false,
    error: message,
    fieldErrors: field ? { ...state.fieldErrors, [field]: message } : state.fieldErrors,
  };
}

export function showHistoryEntry(state: PlannerState, id: number): PlannerState {
  const entry = state.history.find((e) => e.id === id);
  if (!entry) return state;
  return { ...state, itinerary: entry.response, shownHistoryId: id };
}

const FIELD_BY_CODE: Record<string, keyof FieldErrors> = {
  same_source_dest: "dest",
  unknown_poi: "source",
  bad_budget: "budget",
};

/**
 * Drives the submit flow against the API with a single in-flight request;
 * submissions during flight queue behind it (latest wins).
 */
export class PlannerController {
  constructor(
    private readonly api: PlannerApi,
    public state: PlannerState,
    private readonly onChange: (state: PlannerState) => void = () => {},
  ) {}

  private update(state: PlannerState): void {
    this.state = state;
    this.onChange(state);
  }

  async refreshCatalog(): Promise<void> {
    const [pois, health] = await Promise.all([this.api.getPois(), this.api.getHealth()]);
    this.update(setCatalog(this.state, pois, health.model_fingerprint));
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state)) {
      this.update({ ...this.state, fieldErrors: validate(this.state) });
      return;
    }
    const body = requestBody(this.state);
    if (this.state.pending) {
      this.update(queueRequest(this.state, body));
      return;
    }
    this.update(beginRequest(this.state)); // pending flips synchronously
    if (await this.catalogIsStale()) {
      this.update({ ...this.state, queued: null });
      return;
    }
    await this.send(body);
  }

  /** Re-check the model fingerprint so a what-if never runs against a
   * catalog from a previous model load. */
  private async catalogIsStale(): Promise<boolean> {
    if (this.state.modelFingerprint === null) return false;
    let fingerprint: string | null = null;
    try {
      fingerprint = (await this.api.getHealth()).model_fingerprint ?? null;
    } catch {
      return false; // unreachable health never blocks; predict will surface errors
    }
    if (fingerprint === null || fingerprint === this.state.modelFingerprint) return false;
    const pois = await this.api.getPois();
    this.update(setCatalog(this.state, pois, fingerprint));
    this.update(failRequest(this.state, "the model was reloaded; pick POIs from the refreshed catalog"));
    return true;
  }

  private async send(body: PredictBody): Promise<void> {
    this.update(beginRequest(this.state));
    try {
      const outcome = await this.api.predict(body);
      if (outcome.ok) {
        this.update(completeRequest(this.state, body, outcome.record));
      } else {
        this.update(failRequest(this.state, outcome.failure.message, FIELD_BY_CODE[outcome.failure.code]));
      }
    } catch (err) {
      this.update(failRequest(this.state, err instanceof Error ? err.message : String(err)));
    }
    const queued = this.state.queued;
    if (queued) {
      this.update({ ...this.state, queued: null });
      await this.send(queued);
    }
  }
}
