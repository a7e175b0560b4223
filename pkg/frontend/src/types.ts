// Wire types of the prediction API. The UI renders these verbatim and never
// mutates itinerary content.

export interface DurationBand {
  point_s: number;
  ci_low_s: number;
  ci_high_s: number;
  n_samples: number;
}

export interface PoiInfo {
  poi_id: string;
  name: string;
  category: string;
  lat: number;
  lon: number;
  duration: DurationBand | null;
}

export interface ItineraryStop {
  poi_id: string;
  name: string;
  category: string;
  duration_s: number;
  ci_low_s: number | null;
  ci_high_s: number | null;
  n_samples: number | null;
  cumulative_s: number;
  probability: number | null;
}

export interface StepLogEntry {
  iteration: number;
  poi_id: string;
  gap: number;
  probability: number;
}

export interface ItineraryRecord {
  stops: ItineraryStop[];
  total_duration_s: number;
  budget_s: number;
  budget_exceeded: boolean;
  stop_reason: string;
  steps_log: StepLogEntry[];
}

export interface HealthInfo {
  status: string;
  version: string;
  model_fingerprint: string;
  vocab_hash: string;
  rng_identity: string;
}

export interface PredictBody {
  source: string;
  dest: string;
  budget_s: number;
}

export interface ApiFailure {
  code: string;
  message: string;
}

export type PredictOutcome =
  | { ok: true; record: ItineraryRecord }
  | { ok: false; failure: ApiFailure };
