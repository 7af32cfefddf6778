#ifndef SQUEEZE_EQUIV_H
#define SQUEEZE_EQUIV_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define SQZ_ROUTE_ODE 0

#define SQZ_ROUTE_FORMAL 1

typedef enum SqzStatus {
  SQZ_STATUS_OK = 0,
  SQZ_STATUS_NULL_POINTER = 1,
  SQZ_STATUS_INVALID_ARGUMENT = 2,
  SQZ_STATUS_INVALID_PROTOCOL = 3,
  SQZ_STATUS_SOLVER_FAILURE = 4,
  SQZ_STATUS_EXPULSIVE_REGIME = 5,
  SQZ_STATUS_NON_PHYSICAL = 6,
  SQZ_STATUS_PANIC = 7,
} SqzStatus;

// Opaque frequency protocol.
typedef struct SqzProtocol SqzProtocol;

typedef struct SqzEndState {
  double delta;
  double epsilon;
  double omegaf;
} SqzEndState;

typedef struct SqzFinalSqueeze {
  double r_f;
  double lambda_f;
  double qstar;
} SqzFinalSqueeze;

typedef struct SqzObservables {
  double r;
  double phi;
  double sigma_x2;
  double sigma_p2;
  double energy;
  double sigma_h2;
  double excitations;
  double qstar;
} SqzObservables;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null.
const char *sqz_last_error(void);

// Parse a protocol from a JSON object such as
// `{"kind":"sudden_jump","omega0":1,"omega1":2,"omegaf":1,"tau":1.5}`.
//
// # Safety
// `json` must be a valid NUL-terminated string and `out` a valid pointer.
enum SqzStatus sqz_protocol_from_json(const char *json, double m0, struct SqzProtocol **out);

// `ω₀ → ω₁` on `(0, τ]`, then `ω_f`.
//
// # Safety
// `out` must be a valid pointer.
enum SqzStatus sqz_protocol_sudden_jump(double m0,
                                        double omega0,
                                        double omega1,
                                        double omegaf,
                                        double tau,
                                        struct SqzProtocol **out);

// `ω₀e^{t/τ}` on `(0, τ]`, then `ω₀e`.
//
// # Safety
// `out` must be a valid pointer.
enum SqzStatus sqz_protocol_exponential_ramp(double m0,
                                             double omega0,
                                             double tau,
                                             struct SqzProtocol **out);

// # Safety
// `protocol` must be null or a handle from `sqz_protocol_*` not yet freed.
void sqz_protocol_free(struct SqzProtocol *protocol);

// `τ`, `ω₀`, `ω_f` and `m₀` of a protocol. Any output pointer may be null.
//
// # Safety
// `protocol` must be a live handle; non-null outputs must be valid.
enum SqzStatus sqz_protocol_params(const struct SqzProtocol *protocol,
                                   double *tau,
                                   double *omega0,
                                   double *omegaf,
                                   double *m0);

// `(δ, ε, ω_f)` at the end of the modulation, starting from rest.
//
// # Safety
// `protocol` must be a live handle and `out` a valid pointer.
enum SqzStatus sqz_end_state(const struct SqzProtocol *protocol,
                             uint32_t route_code,
                             double rtol,
                             double atol,
                             struct SqzEndState *out);

// `ρ` and `ρ̇` at `len` increasing times. Either output may be null.
//
// # Safety
// `times` must hold `len` readable values; non-null outputs `len` writable ones.
enum SqzStatus sqz_trajectory(const struct SqzProtocol *protocol,
                              uint32_t route_code,
                              double rtol,
                              double atol,
                              const double *times,
                              size_t len,
                              double *rho,
                              double *rho_dot);

// Time-independent squeezing after the modulation.
//
// # Safety
// `out` must be a valid pointer.
enum SqzStatus sqz_final_squeeze(double delta,
                                 double epsilon,
                                 double omegaf,
                                 double m0,
                                 struct SqzFinalSqueeze *out);

// Observables of Fock level `n` for amplitude state `(ρ, ρ̇)` at frequency `ω`.
//
// # Safety
// `out` must be a valid pointer.
enum SqzStatus sqz_observables(double rho,
                               double rho_dot,
                               double omega,
                               uint32_t n,
                               double m0,
                               double hbar,
                               struct SqzObservables *out);

// `P(μ → ν)` for a state squeezed from the ground state to mean excitation `n0`.
//
// # Safety
// `out` must be a valid pointer.
enum SqzStatus sqz_transition_prob(uint32_t mu, uint32_t nu, double n0, double *out);

// Compare two end states; `residuals` (may be null) receives the
// `(ω_f, δ, ε)` differences.
//
// # Safety
// `a`, `b`, `equivalent` must be valid; `residuals`, if non-null, must hold 3 values.
enum SqzStatus sqz_check_equivalence(const struct SqzEndState *a,
                                     const struct SqzEndState *b,
                                     double atol,
                                     double rtol,
                                     bool *equivalent,
                                     double *residuals);

// `qπ/ω₁`; NaN when `omega1 <= 0` or `q == 0`.
double sqz_janszky_adam_tau(double omega1, uint32_t q);

// Library version, static string.
const char *sqz_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SQUEEZE_EQUIV_H */
