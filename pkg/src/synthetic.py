"""
Seeded synthetic hospital series in the ingestion schema.

Deaths follow a latent curve (trend, optional quadratic drift, weekly-ish
oscillation); confirmed cases are an affine function of the noiseless deaths
so the two series move together. Noise only perturbs the deaths column.
"""

import datetime

import numpy as np

from config import SyntheticSpec
from logger import get_logger
from timeseries_data import Dataset, TimeSeriesRecord

logger = get_logger("epiforecast.synth")


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5).astype(np.int64)


def generate(spec: SyntheticSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    t = np.arange(spec.length, dtype=float)

    latent = (
        spec.base_deaths
        + spec.trend * t
        + spec.drift * t**2
        + spec.amplitude * np.sin(2.0 * np.pi * t / spec.period)
    )
    clean_deaths = np.maximum(_round_half_up(latent), 0)
    confirmed = spec.cases_per_death * clean_deaths + spec.baseline_cases

    noise = rng.uniform(-spec.noise, spec.noise, size=spec.length)
    if spec.noise > 0:
        deaths = np.clip(_round_half_up(clean_deaths + noise), 0, confirmed)
    else:
        deaths = clean_deaths

    sex_recorded = rng.binomial(confirmed, spec.coverage)
    male = rng.binomial(sex_recorded, spec.male_share)
    age_recorded = rng.binomial(confirmed, spec.coverage)
    under_45 = rng.binomial(age_recorded, spec.under_45_share)
    comorbid = rng.binomial(confirmed, spec.comorbid_share)

    start = datetime.date.fromisoformat(spec.start_date)
    records = tuple(
        TimeSeriesRecord(
            day_index=i + 1,
            date=start + datetime.timedelta(days=i),
            confirmed=int(confirmed[i]),
            deaths=int(deaths[i]),
            male=int(male[i]),
            female=int(sex_recorded[i] - male[i]),
            under_45=int(under_45[i]),
            over_45=int(age_recorded[i] - under_45[i]),
            comorbid=int(comorbid[i]),
        )
        for i in range(spec.length)
    )
    logger.info("Generated %d synthetic days (seed %d)", spec.length, spec.seed)
    return Dataset(records, source_label=f"synthetic(seed={spec.seed})")
