"""Arnold diffusion in a priori unstable Hamiltonian systems.

Numerical companion for the three-time-scale model

    H = omega_eps . I + p^2/2 + (cos q - 1)(1 + mu f(phi)),
    omega_eps = (1/sqrt(eps), eps^a beta).

Modules: :mod:`system` (model and integration), :mod:`homoclinic`
(pseudo-homoclinic solutions), :mod:`splitting` (homoclinic functions,
Melnikov primitive, fast-angle Fourier analysis), :mod:`condition`
(splitting-condition verifier), :mod:`ergodization` (diophantine constants,
ergodization times, epochs) and :mod:`shadowing` (transition chains and
diffusion orbits).
"""

__version__ = "0.1.0"

from .system import (FrequencyVector, FullState, IntegrationError, SystemParams, Trajectory,
                     TrigPerturbation, eval_perturbation, frequency_vector, hamiltonian,
                     integrate_full, integrate_pendulum, separatrix_p, separatrix_q,
                     unperturbed_separatrix)
from .homoclinic import (BvpSettings, GapError, HomoclinicSolution, NewtonError,
                         SingularJacobianError, solve_k_bump, solve_one_bump_pi,
                         solve_one_bump_psi)
from .splitting import (FourierSurrogate, SplittingReport, build_surrogate, compute_psi_mu,
                        fourier_fast_angle, homoclinic_F, homoclinic_F_tilde, homoclinic_G,
                        homoclinic_G_tilde, melnikov_closed_form, melnikov_primitive,
                        predicted_g1)
from .condition import (ConditionGrids, ConditionParams, SplittingBasis,
                        SplittingConditionCert, lemma33_basis, lemma33_parameters,
                        transfer_condition, verify_condition)
from .ergodization import (DiophantineCert, EpochSchedule, ergodization_time, estimate_gamma,
                           select_epochs, transition_count)
from .shadowing import (ChainCriticalPoint, ChainProblem, DiffusionRun, build_chain_problem,
                        heteroclinic_Fk, maximize_chain, mode_I1_experiment, reconstruct_orbit,
                        reduced_Hk, sweep_epsilon)
