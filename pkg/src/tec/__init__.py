"""Tensor ensemble classifier.

CP tensors are compared with a cross-norm Gaussian tensor kernel after
per-mode Gaussian random projection; each ensemble member is a support
tensor machine fitted by a primal Newton method on the squared hinge loss,
and members vote with a tunable threshold.
"""
from .datagen import CovarianceSpec, SimModelSpec, build_covariance, generate, mvn_sample
from .ensemble import StmModel, TecModel, rpstm_predict, tec_predict, tec_predict_many, tec_train, train_rpstm
from .errors import CapacityError, DataError, ShapeError, SolverError, TecError
from .kernels import BACKEND, GramMatrix, KernelSpec, gram_matrix, mode_kernel_eval, tensor_kernel
from .projection import ProjectionSet, jl_target_dim, project_cp, sample_projection_set
from .stm import StmProblem, StmSolution, decision_value, newton_solve, objective_value
from .tensor import CpTensor, DenseTensor, cp_als, cp_reconstruct, khatri_rao, mode_refold, mode_unfold

__version__ = "0.1.0"
