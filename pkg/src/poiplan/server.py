"""JSON-over-HTTP facade for interactive itinerary planning.

All artifacts load once at startup and stay immutable, so concurrent
identical requests return identical bodies and no locking is needed.
"""

from __future__ import annotations

from typing import Mapping

from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .corpus import Poi, sort_poi_key
from .durations import RNG_IDENTITY, DurationEstimate
from .model import TrainedModel
from .modelio import fingerprint as model_fingerprint
from .predictor import PredictError, PredictRequest, itinerary_record, predict_itinerary


class PredictBody(BaseModel):
    source: str
    dest: str
    budget_s: float


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": {"code": code, "message": message}})


def create_app(
    model: TrainedModel,
    durations: Mapping[str, DurationEstimate],
    pois: Mapping[str, Poi],
    min_duration: float = 0.0,
) -> FastAPI:
    app = FastAPI(title="poiplan", version=__version__)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    fingerprint = model_fingerprint(model)

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok",
            "version": __version__,
            "model_fingerprint": fingerprint,
            "vocab_hash": model.vocab.fingerprint(),
            "rng_identity": RNG_IDENTITY,
        }

    @app.get("/api/pois")
    def list_pois() -> list[dict]:
        out = []
        for poi_id in sorted(pois, key=sort_poi_key):
            poi = pois[poi_id]
            est = durations.get(poi_id)
            out.append(
                {
                    "poi_id": poi.poi_id,
                    "name": poi.name,
                    "category": poi.category,
                    "lat": poi.lat,
                    "lon": poi.lon,
                    "duration": None
                    if est is None
                    else {
                        "point_s": est.point,
                        "ci_low_s": est.ci_low,
                        "ci_high_s": est.ci_high,
                        "n_samples": est.n_samples,
                    },
                }
            )
        return out

    @app.post("/api/predict")
    def predict(body: PredictBody):
        if body.source == body.dest:
            return _error(400, "same_source_dest", "source and destination POI must differ")
        if body.budget_s <= 0:
            return _error(400, "bad_budget", f"budget must be positive, got {body.budget_s}")
        for role, poi_id in (("source", body.source), ("dest", body.dest)):
            if poi_id not in pois:
                return _error(400, "unknown_poi", f"{role} POI {poi_id!r} is unknown")
        try:
            req = PredictRequest(source=body.source, dest=body.dest, budget_s=body.budget_s)
            itin = predict_itinerary(model, durations, req, min_duration)
        except PredictError as exc:
            return _error(400, "unknown_poi", str(exc))
        return itinerary_record(itin, pois, durations)

    return app
