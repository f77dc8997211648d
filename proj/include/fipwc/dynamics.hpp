#pragma once

#include <array>
#include <stdexcept>

namespace fipwc {

// Cart with a flexible beam modelled as two lumped stations: the beam's
// centre of mass at l along the beam (angle phi from vertical) and the tip
// mass at L (angle theta from vertical). Both stations carry a lateral
// restoring spring (k1 tip, k2 beam) and a viscous drag (b1 tip, b2 beam);
// b3 is the cart/track drag.
struct ModelParams {
  double m_t = 0.019;   // tip mass (kg)
  double m_b = 0.0215;  // beam mass (kg)
  double m_c = 0.18;    // cart mass (kg)
  double L = 0.32;      // beam length (m)
  double l = 0.16;      // beam centre-of-mass offset, always L/2 (m)
  double k1 = 2.0;      // tip spring (N/m)
  double k2 = 8.0;      // beam spring (N/m)
  double b1 = 0.001;    // tip damping (N s/m)
  double b2 = 0.001;    // beam damping (N s/m)
  double b3 = 12.0;     // cart damping (N s/m)
  double g = 9.81;      // gravity (m/s^2)

  // Throws std::invalid_argument on nonsense values. l must equal L/2
  // exactly; it is kept as a field only so formulas read naturally.
  void validate() const;
};

// State ordering is fixed and shared by every downstream consumer
// (observations, reward weights, CSV columns).
struct StateVector {
  double z = 0.0;          // cart position (m)
  double z_dot = 0.0;      // cart velocity (m/s)
  double phi = 0.0;        // beam centre-of-mass angle (rad)
  double phi_dot = 0.0;    // beam angular rate (rad/s)
  double theta = 0.0;      // tip angle (rad)
  double theta_dot = 0.0;  // tip angular rate (rad/s)

  std::array<double, 6> as_array() const {
    return {z, z_dot, phi, phi_dot, theta, theta_dot};
  }
  static StateVector from_array(const std::array<double, 6>& a) {
    return {a[0], a[1], a[2], a[3], a[4], a[5]};
  }
};

struct Accelerations {
  double theta_ddot = 0.0;
  double phi_ddot = 0.0;
  double z_ddot = 0.0;
};

// Row/column order of the generalized-coordinate system: (theta, phi, z).
struct Mat3 {
  std::array<double, 9> a{};
  double& operator()(int r, int c) { return a[3 * r + c]; }
  double operator()(int r, int c) const { return a[3 * r + c]; }
};

struct Vec3 {
  std::array<double, 3> v{};
  double& operator[](int i) { return v[i]; }
  double operator[](int i) const { return v[i]; }
};

struct SingularMatrixError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Solves M x = b by Gaussian elimination with partial pivoting. Throws
// SingularMatrixError when the 1-norm condition estimate exceeds 1e12 or a
// pivot vanishes (also catches non-finite inputs).
Vec3 solve3(const Mat3& m, const Vec3& b);

// Symmetric positive definite inertia matrix in (theta, phi, z) order.
Mat3 mass_matrix(const StateVector& s, const ModelParams& p);

// Right-hand side of M qdd = rhs: every velocity, spring, gravity and drag
// term moved off the acceleration side, plus the external force F on the
// cart row.
Vec3 generalized_forces(const StateVector& s, double force, const ModelParams& p);

Accelerations accelerations(const StateVector& s, double force, const ModelParams& p);

// Time derivative of the state under constant force.
StateVector derivative(const StateVector& s, double force, const ModelParams& p);

// Classical fixed-step RK4 with the force held constant over the step.
StateVector rk4_step(const StateVector& s, double force, const ModelParams& p, double dt);

// Kinetic plus potential energy, zero at the upright rest state. Conserved
// by the model when b1 = b2 = b3 = 0 and F = 0; non-increasing under
// damping alone.
double total_energy(const StateVector& s, const ModelParams& p);

}  // namespace fipwc
