"""Scikit-learn style estimators for the two surrogate families.

Both estimators implement fit(Y, U) / predict(Y) on arrays of parameter
points Y in [-1,1]^d and coefficient rows U in R^K, and inherit
get_params/set_params so they compose with pipelines, grid search and
cross-validation utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import dnn
from .hilbert import DiscreteHilbertSpace, identity_space
from .multiindex import hyperbolic_cross
from .polybasis import evaluate_basis
from .srlasso import SolverConfig, lambda_rule, auto_sparsity, recover_coefficients
from .validation import check_parameter_array, check_value_array


def _resolve_space(gram, K: int) -> DiscreteHilbertSpace:
    if gram is None:
        return identity_space(K)
    if isinstance(gram, DiscreteHilbertSpace):
        if gram.dim != K:
            raise ValueError("space dimension does not match value columns")
        return gram
    return DiscreteHilbertSpace(np.asarray(gram, dtype=float))


class SparsePolynomialSurrogate(BaseEstimator):
    """Block-sparse Legendre surrogate fitted by convex recovery.

    Parameters
    ----------
    order : hyperbolic-cross order p; the index set is {nu : prod(nu_k+1) <= p+1}
    lam : regularization weight, or "auto" for the sparsity-based rule
    solver : "srlasso" (square-root data term) or "lasso" (squared data term)
    gram : K x K Gram matrix or DiscreteHilbertSpace; identity when None
    max_iters, rel_tol : solver stopping controls
    continuation_stages : geometric continuation stages for the "lasso" solver
    """

    def __init__(
        self,
        order: int = 3,
        lam="auto",
        solver: str = "srlasso",
        gram=None,
        max_iters: int = 200_000,
        rel_tol: float = 1e-10,
        continuation_stages: int = 6,
    ):
        self.order = order
        self.lam = lam
        self.solver = solver
        self.gram = gram
        self.max_iters = max_iters
        self.rel_tol = rel_tol
        self.continuation_stages = continuation_stages

    def fit(self, Y, U):
        Y = check_parameter_array(Y)
        U = check_value_array(U, Y.shape[0])
        d = Y.shape[1]
        self.space_ = _resolve_space(self.gram, U.shape[1])
        self.index_set_ = hyperbolic_cross(d, self.order + 1)
        config = SolverConfig(
            max_iters=self.max_iters,
            rel_tol=self.rel_tol,
            continuation_stages=self.continuation_stages if self.solver == "lasso" else 1,
        )
        result = recover_coefficients(
            (Y, U),
            self.index_set_,
            lam=self.lam,
            space=self.space_,
            config=config,
            solver=self.solver,
            full_output=True,
        )
        self.result_ = result
        self.coef_ = result.solution.coeffs
        self.lam_ = (
            lambda_rule(auto_sparsity(Y.shape[0], d)) if self.lam == "auto" else float(self.lam)
        )
        return self

    def predict(self, Y) -> np.ndarray:
        if not hasattr(self, "coef_"):
            raise RuntimeError("estimator is not fitted")
        Y = check_parameter_array(Y, dim=self.index_set_.dim)
        return evaluate_basis(self.index_set_, Y) @ self.coef_


class DNNSurrogate(BaseEstimator):
    """Fully-connected network surrogate trained with seeded Adam.

    The architecture has ``hidden_layers`` hidden layers of ``width`` nodes;
    loss is the plain mean squared error or its Gram-weighted variant
    ("mvnse", requires ``gram``).
    """

    def __init__(
        self,
        hidden_layers: int = 5,
        width: int = 50,
        activation: str = "tanh",
        loss: str = "mse",
        gram=None,
        epochs: int = 50_000,
        tol: float = 5e-7,
        batch_size=None,
        lr: float = 1e-3,
        lr_decay: float = 0.99,
        decay_every: int = 1000,
        init_seed: int = 0,
        shuffle_seed: int = 0,
        precision: str = "double",
    ):
        self.hidden_layers = hidden_layers
        self.width = width
        self.activation = activation
        self.loss = loss
        self.gram = gram
        self.epochs = epochs
        self.tol = tol
        self.batch_size = batch_size
        self.lr = lr
        self.lr_decay = lr_decay
        self.decay_every = decay_every
        self.init_seed = init_seed
        self.shuffle_seed = shuffle_seed
        self.precision = precision

    def fit(self, Y, U):
        Y = check_parameter_array(Y)
        U = check_value_array(U, Y.shape[0])
        space = _resolve_space(self.gram, U.shape[1]) if self.loss == "mvnse" else None
        widths = dnn.model_widths(Y.shape[1], self.hidden_layers, self.width, U.shape[1])
        model = dnn.init_model(widths, self.activation, seed=self.init_seed)
        config = dnn.TrainConfig(
            loss=self.loss,
            epochs=self.epochs,
            tol=self.tol,
            batch_size=self.batch_size,
            lr=self.lr,
            lr_decay=self.lr_decay,
            decay_every=self.decay_every,
            seed=self.shuffle_seed,
            precision=self.precision,
        )
        self.model_, self.history_ = dnn.train(model, (Y, U), config, space=space)
        return self

    def predict(self, Y) -> np.ndarray:
        if not hasattr(self, "model_"):
            raise RuntimeError("estimator is not fitted")
        Y = check_parameter_array(Y, dim=self.model_.widths[0])
        return dnn.forward(self.model_, Y)
