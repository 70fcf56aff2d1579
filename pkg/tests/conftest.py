import pytest

from epichain import epi, smc


@pytest.fixture(scope="session")
def sir_table():
    return epi.preset("sir-table1")


@pytest.fixture(scope="session")
def sir_measurements(sir_table):
    """Deterministic infected series used as filter/MCMC measurements."""
    kind, params, initial = sir_table
    det = epi.simulate_deterministic(kind, params, initial, 201)
    i_col = epi.MODEL_COMPARTMENTS[kind].index("I")
    return smc.MeasurementSeries(y=det[1:, i_col], sigma=100.0)
