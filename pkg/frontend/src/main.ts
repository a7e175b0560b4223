// Browser bootstrap: wires the pure state/render modules to the DOM.

import { PlannerApi } from "./api.js";
import { renderApp } from "./render.js";
import {
  PlannerController,
  initialState,
  setBudgetHours,
  setDest,
  setSource,
  showHistoryEntry,
} from "./state.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const api = new PlannerApi("");
const controller = new PlannerController(api, initialState(), (state) => {
  root.innerHTML = renderApp(state);
});

root.addEventListener("change", (event) => {
  const target = event.target as HTMLElement;
  if (target.id === "source") {
    controller.state = setSource(controller.state, (target as HTMLSelectElement).value || null);
  } else if (target.id === "dest") {
    controller.state = setDest(controller.state, (target as HTMLSelectElement).value || null);
  } else if (target.id === "budget") {
    controller.state = setBudgetHours(controller.state, Number((target as HTMLInputElement).value));
  } else {
    return;
  }
  root.innerHTML = renderApp(controller.state);
});

root.addEventListener("click", (event) => {
  const target = event.target as HTMLElement;
  if (target.id === "predict") {
    void controller.submit();
    return;
  }
  const entry = target.closest("[data-history-id]") as HTMLElement | null;
  if (entry) {
    controller.state = showHistoryEntry(controller.state, Number(entry.dataset.historyId));
    root.innerHTML = renderApp(controller.state);
  }
});

root.innerHTML = renderApp(controller.state);
void controller.refreshCatalog().catch((err) => {
  root.innerHTML = `<div class="banner error">Cannot reach the prediction API: ${String(err)}</div>`;
});
