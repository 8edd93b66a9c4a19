from .core.cli_io import compare_rate_tables, ingest_rate_table, run
from .core.liouvillian import DensityMatrix, LindbladModel, evolve, steady_state
from .core.observables import log_negativity, spectrum_engine, spectrum_ss
from .core.qnm_rates import QnmModel, RateSet, build_rateset, calibrate
from .core.scenario import load_scenario


def SpectrumEngine(model, method="resolvent", debug=False):  # pylint: disable=invalid-name
    """ Spectrum engine for `method` ("resolvent" or "time-domain") bound to `model`. """
    return spectrum_engine(method)(model, debug=debug)


__all__ = ['DensityMatrix', 'LindbladModel', 'QnmModel', 'RateSet', 'SpectrumEngine',
           'build_rateset', 'calibrate', 'compare_rate_tables', 'evolve', 'ingest_rate_table',
           'load_scenario', 'log_negativity', 'run', 'spectrum_ss', 'steady_state']
