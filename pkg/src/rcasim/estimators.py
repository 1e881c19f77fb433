"""scikit-learn style wrappers.

``CouplerPlacement`` fits coupler positions and/or loads to a channel;
``PathRecovery`` fits paths to pilot measurements and predicts the
effective channel of unseen layouts. Hyperparameters live in ``__init__``
and fitted state in trailing-underscore attributes, so both work with
``get_params``/``set_params``/``clone``.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .channel import PathSet, channel_gain, effective_channel
from .em import DipoleSpec, LoadConfig
from .errors import ConfigError, DomainError
from .estimate import AngleGrid, MeasurementSet, recover_paths, reconstruct_channel
from .layout import ArrayLayout
from .optimize import (OptimizationConfig, optimize_joint, optimize_loads, optimize_positions,
                       quantize_positions)


def _check_pathset(pathset):
    if not isinstance(pathset, PathSet):
        raise DomainError(f"expected a PathSet, got {type(pathset).__name__}")
    return pathset


def _check_layouts(layouts):
    if isinstance(layouts, ArrayLayout):
        return [layouts]
    layouts = list(layouts)
    if not all(isinstance(lay, ArrayLayout) for lay in layouts):
        raise DomainError("expected ArrayLayout objects")
    return layouts


class CouplerPlacement(BaseEstimator):
    """Optimize an RCA array for a given multipath channel.

    Parameters
    ----------
    layout : ArrayLayout
        Initial (feasible) layout; restart 0 starts here.
    wavelength : float
    mode : {"positions", "loads", "joint"}
    loads : LoadConfig, optional
        Loads used by ``mode="positions"``; short circuits by default.
    load_bounds : tuple of float
        Reactance box in ohms for ``"loads"`` and ``"joint"``.
    quantization_step : float, optional
        If set, fitted positions are snapped to this grid pitch.
    random_state : int
        Seed of the restart substreams.

    Attributes
    ----------
    layout_, loads_, trace_, snr_
    """

    def __init__(self, layout=None, wavelength=0.04, mode="positions", loads=None,
                 load_bounds=(-300.0, 300.0), max_outer_iterations=200, step_init=None,
                 armijo_shrink=0.5, armijo_slope=1e-4, tolerance=1e-7, restarts=8,
                 fd_epsilon=None, quantization_step=None, random_state=0):
        self.layout = layout
        self.wavelength = wavelength
        self.mode = mode
        self.loads = loads
        self.load_bounds = load_bounds
        self.max_outer_iterations = max_outer_iterations
        self.step_init = step_init
        self.armijo_shrink = armijo_shrink
        self.armijo_slope = armijo_slope
        self.tolerance = tolerance
        self.restarts = restarts
        self.fd_epsilon = fd_epsilon
        self.quantization_step = quantization_step
        self.random_state = random_state

    def _config(self):
        return OptimizationConfig(
            max_outer_iterations=self.max_outer_iterations, step_init=self.step_init,
            armijo_shrink=self.armijo_shrink, armijo_slope=self.armijo_slope,
            tolerance=self.tolerance, restarts=self.restarts, fd_epsilon=self.fd_epsilon,
            quantization_step=self.quantization_step, seed=self.random_state)

    def fit(self, pathset, y=None):
        pathset = _check_pathset(pathset)
        if not isinstance(self.layout, ArrayLayout):
            raise ConfigError("CouplerPlacement needs an initial ArrayLayout")
        spec = DipoleSpec(self.wavelength)
        cfg = self._config()
        loads = self.loads if self.loads is not None else LoadConfig.short(self.layout.n_couplers)
        if self.mode == "positions":
            trace = optimize_positions(self.layout, pathset, loads, cfg, spec)
            layout = trace.final_layout
        elif self.mode == "loads":
            loads, trace = optimize_loads(self.layout, pathset, self.load_bounds, cfg, spec)
            layout = self.layout
        elif self.mode == "joint":
            layout, loads, trace = optimize_joint(self.layout, pathset, self.load_bounds, cfg, spec)
        else:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.quantization_step is not None:
            trace.final_loads = loads
            layout = quantize_positions(trace, self.quantization_step, pathset, spec, loads).layout
        self.layout_ = layout
        self.loads_ = loads
        self.trace_ = trace
        self.snr_ = float(channel_gain(effective_channel(layout, pathset, loads, spec)))
        return self

    def predict(self, pathset):
        """Effective channel of the fitted configuration under ``pathset``."""
        check_is_fitted(self, "layout_")
        return effective_channel(self.layout_, _check_pathset(pathset), self.loads_,
                                 DipoleSpec(self.wavelength))

    def score(self, pathset, y=None):
        """Channel gain (SNR at unit transmit-to-noise power ratio)."""
        return float(channel_gain(self.predict(pathset)))


class PathRecovery(BaseEstimator):
    """Grid-based multipath recovery from coupler-snapshot pilots.

    Attributes
    ----------
    paths_ : EstimatedPaths
    residual_ : float
    """

    def __init__(self, wavelength=0.04, sparsity=3, n_azimuth=64, n_elevation=16,
                 widths=(512, 64), max_nodes=100000):
        self.wavelength = wavelength
        self.sparsity = sparsity
        self.n_azimuth = n_azimuth
        self.n_elevation = n_elevation
        self.widths = widths
        self.max_nodes = max_nodes

    def fit(self, measurements, y=None):
        if not isinstance(measurements, MeasurementSet):
            raise DomainError("PathRecovery.fit expects a MeasurementSet")
        grid = AngleGrid(self.n_azimuth, self.n_elevation)
        self.paths_ = recover_paths(measurements, grid, self.sparsity,
                                    DipoleSpec(self.wavelength), self.widths, self.max_nodes)
        self.residual_ = self.paths_.residual
        return self

    def predict(self, layouts, loads=None):
        """Effective channels of ``layouts``, shape (n_layouts, M)."""
        check_is_fitted(self, "paths_")
        layouts = _check_layouts(layouts)
        spec = DipoleSpec(self.wavelength)
        out = []
        for lay in layouts:
            ld = loads if loads is not None else LoadConfig.short(lay.n_couplers)
            out.append(reconstruct_channel(self.paths_, lay, ld, spec))
        return np.array(out)

    def score(self, measurements, y=None):
        """Fraction of measurement energy explained (1 is a perfect fit)."""
        check_is_fitted(self, "paths_")
        pred = np.array([self.predict(lay, ld)[0].sum()
                         for lay, ld in zip(measurements.layouts, measurements.loads)])
        obs = measurements.observations
        return 1.0 - float(np.sum(np.abs(obs - pred) ** 2) / np.sum(np.abs(obs) ** 2))
