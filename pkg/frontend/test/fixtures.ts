import type { HealthInfo, ItineraryRecord, PoiInfo } from "../src/types";

export const FIXTURE_POIS: PoiInfo[] = [
  { poi_id: "a", name: "Poi A", category: "Museum", lat: 34.0, lon: 135.0,
    duration: { point_s: 3600, ci_low_s: 3400, ci_high_s: 3800, n_samples: 40 } },
  { poi_id: "m", name: "Poi M", category: "Park", lat: 34.01, lon: 135.01,
    duration: { point_s: 3600, ci_low_s: 3500, ci_high_s: 3700, n_samples: 38 } },
  { poi_id: "b", name: "Poi B", category: "Shrine", lat: 34.02, lon: 135.02,
    duration: { point_s: 3600, ci_low_s: 3600, ci_high_s: 3600, n_samples: 41 } },
  { poi_id: "x", name: "Poi X", category: "Market", lat: 34.03, lon: 135.03, duration: null },
];

export const FIXTURE_ITINERARY: ItineraryRecord = {
  stops: [
    { poi_id: "a", name: "Poi A", category: "Museum", duration_s: 3600,
      ci_low_s: 3400, ci_high_s: 3800, n_samples: 40, cumulative_s: 3600, probability: null },
    { poi_id: "m", name: "Poi M", category: "Park", duration_s: 3600,
      ci_low_s: 3500, ci_high_s: 3700, n_samples: 38, cumulative_s: 7200, probability: 0.9863 },
    { poi_id: "b", name: "Poi B", category: "Shrine", duration_s: 4200,
      ci_low_s: 3600, ci_high_s: 3600, n_samples: 41, cumulative_s: 11400, probability: null },
  ],
  total_duration_s: 11400,
  budget_s: 10800,
  budget_exceeded: false,
  stop_reason: "budget_reached",
  steps_log: [{ iteration: 1, poi_id: "m", gap: 1, probability: 0.9863 }],
};

export const FIXTURE_HEALTH: HealthInfo = {
  status: "ok",
  version: "0.1.0",
  model_fingerprint: "f".repeat(64),
  vocab_hash: "v".repeat(64),
  rng_identity: "numpy.random.default_rng(PCG64)",
};

export function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}
