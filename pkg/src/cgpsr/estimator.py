"""Scikit-learn estimator wrapping the evolution engine.

SymbolicRegressor evolves a Pareto front of closed-form expressions
trading mean-squared error against expression size; predict() uses the
lowest-loss front member.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset
from .duals import KernelSet
from .evolution import EvolutionConfig, multi_start
from .genotype import CgpParams, evaluate


class SymbolicRegressor(RegressorMixin, BaseEstimator):
    """Symbolic regression via Cartesian genetic programming.

    Expressions are evolved under a memetic multi-objective strategy: every
    offspring's constants take one Newton step on the exact loss gradient and
    Hessian, and survivors are selected over (loss, complexity), so fit()
    yields a whole accuracy/simplicity front rather than a single model.

    Parameters
    ----------
    kernels : sequence of str
        Building blocks drawn from {"add", "sub", "mul", "div", "log", "sin"}.
    rows, columns, levels_back : int
        Program grid shape; levels_back=None allows connections to reach any
        earlier column.
    n_constants : int
        Number of tunable constants available to each expression.
    max_mutations : int
        Upper bound on mutated genes per offspring.
    population_size, generations, n_starts : int
        Evolution budget; n_starts > 1 restarts with consecutive seeds and
        keeps the front of the best run.
    n_jobs : int
        Process parallelism across restarts.
    random_state : int or None
        Base seed; None draws a fresh one.
    """

    def __init__(
        self,
        kernels=("add", "sub", "mul", "div"),
        rows=2,
        columns=16,
        levels_back=None,
        n_constants=5,
        max_mutations=4,
        population_size=40,
        generations=500,
        n_starts=1,
        n_jobs=1,
        random_state=0,
    ):
        self.kernels = kernels
        self.rows = rows
        self.columns = columns
        self.levels_back = levels_back
        self.n_constants = n_constants
        self.max_mutations = max_mutations
        self.population_size = population_size
        self.generations = generations
        self.n_starts = n_starts
        self.n_jobs = n_jobs
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        params = CgpParams(
            n_features=X.shape[1],
            n_constants=self.n_constants,
            rows=self.rows,
            columns=self.columns,
            levels_back=self.levels_back if self.levels_back else self.columns,
            kernels=KernelSet(tuple(self.kernels)),
        )
        seed = self.random_state
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**32))
        cfg = EvolutionConfig(
            cgp=params,
            population_size=self.population_size,
            generations=self.generations,
            max_mutations=self.max_mutations,
            seed=int(seed),
        )
        data = Dataset(features=X, targets=y)
        result = multi_start(data, cfg, self.n_starts, parallelism=self.n_jobs or 1)
        self.n_features_in_ = X.shape[1]
        self.cgp_params_ = params
        self.result_ = result
        self.front_ = result.best_run.front
        self.best_member_ = self.front_.extreme
        self.expression_ = self.best_member_.expression
        return self

    def predict(self, X):
        check_is_fitted(self, "front_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features; fitted with {self.n_features_in_}"
            )
        cols = [np.ascontiguousarray(X[:, i], dtype=float) for i in range(X.shape[1])]
        out = np.asarray(evaluate(self.best_member_.genotype, self.cgp_params_, cols))
        return np.array(np.broadcast_to(out, (X.shape[0],)), dtype=float)

    def pareto_front(self) -> list[dict]:
        """The fitted front, simplest expression first."""
        check_is_fitted(self, "front_")
        return [
            {
                "expression": m.expression,
                "loss": m.loss,
                "complexity": m.complexity,
                "constants": [float(c) for c in m.genotype.constants],
            }
            for m in self.front_.members
        ]
