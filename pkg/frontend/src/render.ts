// Pure view functions: state in, HTML strings out. Keeping them DOM-free
// lets the contract tests run headlessly; main.ts only splices the strings
// into the page. Itinerary content is rendered verbatim from the server
// response (stop order, durations, probabilities), never recomputed here.

import type { HistoryEntry, PlannerState } from "./state.js";
import { canSubmit } from "./state.js";
import type { ItineraryRecord, PoiInfo } from "./types.js";

export function escapeHtml(raw: string): string {
  return raw
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatHours(seconds: number): string {
  const hours = Math.floor(seconds / 3600);
  const minutes = Math.round((seconds - hours * 3600) / 60);
  return `${hours}h${minutes.toString().padStart(2, "0")}`;
}

export function renderPoiOptions(catalog: PoiInfo[], selected: string | null): string {
  const blank = `<option value=""${selected === null ? " selected" : ""}>choose…</option>`;
  const options = catalog.map((poi) => {
    const label = `${escapeHtml(poi.name)} (${escapeHtml(poi.category)})`;
    const sel = poi.poi_id === selected ? " selected" : "";
    return `<option value="${escapeHtml(poi.poi_id)}"${sel}>${label}</option>`;
  });
  return [blank, ...options].join("");
}

export function renderError(message: string | null): string {
  if (!message) return "";
  return `<div class="banner error" role="alert">${escapeHtml(message)}</div>`;
}

export function renderItinerary(record: ItineraryRecord | null): string {
  if (!record) return `<p class="placeholder">No itinerary yet. Pick endpoints and predict.</p>`;
  const over = record.total_duration_s > record.budget_s;
  const warn = record.budget_exceeded
    ? `<div class="banner warn">Budget is below the time needed for the two endpoints alone.</div>`
    : "";
  const rows = record.stops
    .map((stop, i) => {
      const pct = Math.min(100, (100 * stop.cumulative_s) / record.budget_s);
      const overshoot = stop.cumulative_s > record.budget_s;
      const ci =
        stop.ci_low_s !== null && stop.ci_high_s !== null
          ? `${formatHours(stop.ci_low_s)}–${formatHours(stop.ci_high_s)}`
          : "n/a";
      const prob = stop.probability === null ? "n/a" : `${(100 * stop.probability).toFixed(1)}%`;
      return (
        `<tr class="stop${overshoot ? " overshoot" : ""}" data-poi="${escapeHtml(stop.poi_id)}">` +
        `<td>${i + 1}</td>` +
        `<td>${escapeHtml(stop.name)}<span class="cat">${escapeHtml(stop.category)}</span></td>` +
        `<td>${formatHours(stop.duration_s)}<span class="ci">${ci}</span></td>` +
        `<td><div class="bar"><div class="fill${overshoot ? " over" : ""}" style="width:${pct.toFixed(1)}%"></div></div>` +
        `${formatHours(stop.cumulative_s)}</td>` +
        `<td>${prob}</td>` +
        `</tr>`
      );
    })
    .join("");
  const summary =
    `<p class="summary${over ? " over" : ""}">total ${formatHours(record.total_duration_s)} ` +
    `of ${formatHours(record.budget_s)} budget · stopped: ${escapeHtml(record.stop_reason)}` +
    `${over ? " (overshoots budget)" : ""}</p>`;
  return (
    warn +
    `<table class="itinerary"><thead><tr><th>#</th><th>POI</th><th>visit</th><th>cumulative</th><th>ins. prob</th></tr></thead>` +
    `<tbody>${rows}</tbody></table>` +
    summary
  );
}

export function renderHistory(history: HistoryEntry[], shownId: number | null): string {
  if (history.length === 0) return `<p class="placeholder">No previous queries.</p>`;
  const items = history
    .map((entry) => {
      const req = entry.request;
      const active = entry.id === shownId ? " active" : "";
      return (
        `<li class="history-entry${active}" data-history-id="${entry.id}">` +
        `${escapeHtml(req.source)} → ${escapeHtml(req.dest)} @ ${formatHours(req.budget_s)} ` +
        `(${entry.response.stops.length} stops)` +
        `</li>`
      );
    })
    .join("");
  return `<ol class="history">${items}</ol>`;
}

/** Coordinate scatter with the itinerary path; no map tiles by design. */
export function renderScatter(catalog: PoiInfo[], record: ItineraryRecord | null): string {
  if (catalog.length === 0) return "";
  const lats = catalog.map((p) => p.lat);
  const lons = catalog.map((p) => p.lon);
  const [minLat, maxLat] = [Math.min(...lats), Math.max(...lats)];
  const [minLon, maxLon] = [Math.min(...lons), Math.max(...lons)];
  const w = 320;
  const h = 240;
  const pad = 14;
  const x = (lon: number) =>
    maxLon === minLon ? w / 2 : pad + ((lon - minLon) / (maxLon - minLon)) * (w - 2 * pad);
  const y = (lat: number) =>
    maxLat === minLat ? h / 2 : h - pad - ((lat - minLat) / (maxLat - minLat)) * (h - 2 * pad);
  const byId = new Map(catalog.map((p) => [p.poi_id, p]));
  const onRoute = new Set((record?.stops ?? []).map((s) => s.poi_id));
  const dots = catalog
    .map(
      (p) =>
        `<circle cx="${x(p.lon).toFixed(1)}" cy="${y(p.lat).toFixed(1)}" r="${onRoute.has(p.poi_id) ? 5 : 3}"` +
        ` class="poi${onRoute.has(p.poi_id) ? " route" : ""}"><title>${escapeHtml(p.name)}</title></circle>`,
    )
    .join("");
  let path = "";
  if (record && record.stops.length > 1) {
    const points = record.stops
      .map((s) => byId.get(s.poi_id))
      .filter((p): p is PoiInfo => p !== undefined)
      .map((p) => `${x(p.lon).toFixed(1)},${y(p.lat).toFixed(1)}`)
      .join(" ");
    path = `<polyline points="${points}" fill="none" class="route-line"/>`;
  }
  return `<svg viewBox="0 0 ${w} ${h}" class="scatter">${path}${dots}</svg>`;
}

export function renderApp(state: PlannerState): string {
  const disabled = canSubmit(state) ? "" : " disabled";
  const fe = state.fieldErrors;
  const field = (key: "source" | "dest" | "budget") =>
    fe[key] ? `<span class="field-error">${escapeHtml(fe[key] as string)}</span>` : "";
  return `
<section class="controls">
  <label>From
    <select id="source">${renderPoiOptions(state.catalog, state.source)}</select>${field("source")}
  </label>
  <label>To
    <select id="dest">${renderPoiOptions(state.catalog, state.dest)}</select>${field("dest")}
  </label>
  <label>Budget <output id="budget-value">${state.budgetHours}h</output>
    <input id="budget" type="range" min="1" max="16" step="0.5" value="${state.budgetHours}"/>${field("budget")}
  </label>
  <button id="predict"${disabled}>${state.pending ? "Predicting…" : "Predict itinerary"}</button>
</section>
${renderError(state.error)}
<section class="result">${renderItinerary(state.itinerary)}</section>
<section class="map">${renderScatter(state.catalog, state.itinerary)}</section>
<section class="past"><h2>History</h2>${renderHistory(state.history, state.shownHistoryId)}</section>
`;
}
