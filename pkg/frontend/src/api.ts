import type { HealthInfo, ItineraryRecord, PoiInfo, PredictBody, PredictOutcome } from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** Thin typed client over the planning API; fetch is injectable for tests. */
export class PlannerApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  async getPois(): Promise<PoiInfo[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/pois`);
    if (!resp.ok) throw new Error(`POI catalog request failed: HTTP ${resp.status}`);
    return (await resp.json()) as PoiInfo[];
  }

  async getHealth(): Promise<HealthInfo> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/health`);
    if (!resp.ok) throw new Error(`health request failed: HTTP ${resp.status}`);
    return (await resp.json()) as HealthInfo;
  }

  async predict(body: PredictBody): Promise<PredictOutcome> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/predict`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
    if (resp.status === 400) {
      const payload = (await resp.json()) as { error: { code: string; message: string } };
      return { ok: false, failure: payload.error };
    }
    if (!resp.ok) throw new Error(`predict request failed: HTTP ${resp.status}`);
    return { ok: true, record: (await resp.json()) as ItineraryRecord };
  }
}
