#include "fipwc/dynamics.hpp"

#include <cmath>
#include <string>

namespace fipwc {

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("model params: " + msg); };
  if (!(m_t > 0.0) || !(m_b > 0.0) || !(m_c > 0.0)) fail("masses must be positive");
  if (!(L > 0.0)) fail("beam length must be positive");
  if (l != 0.5 * L) fail("centre-of-mass offset l must equal L/2 exactly");
  if (!(k1 >= 0.0) || !(k2 >= 0.0)) fail("spring constants must be non-negative");
  if (!(b1 >= 0.0) || !(b2 >= 0.0) || !(b3 >= 0.0)) fail("damping constants must be non-negative");
  if (!(g > 0.0)) fail("gravity must be positive");
}

Mat3 mass_matrix(const StateVector& s, const ModelParams& p) {
  const double ct = std::cos(s.theta);
  const double cp = std::cos(s.phi);
  const double ctp = std::cos(s.theta - s.phi);

  Mat3 m;
  m(0, 0) = p.m_t * p.L * p.L;
  m(0, 1) = p.m_t * p.L * p.l * ctp;
  m(0, 2) = p.m_t * p.L * ct;
  m(1, 1) = (p.m_t + p.m_b) * p.l * p.l;
  m(1, 2) = (p.m_t + p.m_b) * p.l * cp;
  m(2, 2) = p.m_c + p.m_b + p.m_t;
  m(1, 0) = m(0, 1);
  m(2, 0) = m(0, 2);
  m(2, 1) = m(1, 2);
  return m;
}

Vec3 generalized_forces(const StateVector& s, double force, const ModelParams& p) {
  const double st = std::sin(s.theta);
  const double ct = std::cos(s.theta);
  const double sp = std::sin(s.phi);
  const double cp = std::cos(s.phi);
  const double stp = std::sin(s.theta - s.phi);
  const double ctp = std::cos(s.theta - s.phi);
  const double s2t = std::sin(2.0 * s.theta);
  const double s2p = std::sin(2.0 * s.phi);

  Vec3 r;
  // tip row
  r[0] = -(p.m_t * p.L * p.l * s.phi_dot * s.phi_dot * stp
           + 0.5 * p.k1 * p.L * p.L * s2t
           - p.m_t * p.g * p.L * st
           + p.b1 * p.L * s.z_dot * ct
           + p.b1 * p.L * p.L * s.theta_dot
           + p.b1 * p.L * p.l * s.phi_dot * ctp);
  // beam row
  r[1] = -((p.b1 + p.b2) * p.l * s.z_dot * cp
           + (p.b1 + p.b2) * p.l * p.l * s.phi_dot
           + p.b1 * p.L * p.l * s.theta_dot * ctp
           - p.m_t * p.L * p.l * s.theta_dot * s.theta_dot * stp
           + 0.5 * p.k2 * p.l * p.l * s2p
           - p.m_b * p.g * p.l * sp);
  // cart row
  r[2] = force
         + (p.m_t + p.m_b) * p.l * s.phi_dot * s.phi_dot * sp
         + p.m_t * p.L * s.theta_dot * s.theta_dot * st
         - (p.b1 + p.b2 + p.b3) * s.z_dot
         - (p.b1 + p.b2) * p.l * s.phi_dot * cp
         - p.b1 * p.L * s.theta_dot * ct;
  return r;
}

Vec3 solve3(const Mat3& m, const Vec3& b) {
  // Augment with the identity so one elimination yields both the solution
  // and the explicit inverse for the condition estimate.
  double a[3][7] = {
      {m(0, 0), m(0, 1), m(0, 2), b[0], 1.0, 0.0, 0.0},
      {m(1, 0), m(1, 1), m(1, 2), b[1], 0.0, 1.0, 0.0},
      {m(2, 0), m(2, 1), m(2, 2), b[2], 0.0, 0.0, 1.0},
  };

  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int r = col + 1; r < 3; ++r) {
      if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
    }
    if (!(std::fabs(a[piv][col]) > 0.0)) throw SingularMatrixError("mass matrix solve: zero pivot");
    if (piv != col) {
      for (int c = 0; c < 7; ++c) std::swap(a[piv][c], a[col][c]);
    }
    const double inv_p = 1.0 / a[col][col];
    for (int r = 0; r < 3; ++r) {
      if (r == col) continue;
      const double f = a[r][col] * inv_p;
      if (f == 0.0) continue;
      for (int c = col; c < 7; ++c) a[r][c] -= f * a[col][c];
    }
  }

  double norm_m = 0.0, norm_inv = 0.0;
  for (int c = 0; c < 3; ++c) {
    double sm = 0.0, si = 0.0;
    for (int r = 0; r < 3; ++r) {
      sm += std::fabs(m(r, c));
      si += std::fabs(a[r][4 + c] / a[r][r]);
    }
    norm_m = std::max(norm_m, sm);
    norm_inv = std::max(norm_inv, si);
  }
  const double cond = norm_m * norm_inv;
  if (!(cond < 1e12)) throw SingularMatrixError("mass matrix solve: condition estimate " + std::to_string(cond));

  Vec3 x;
  for (int r = 0; r < 3; ++r) x[r] = a[r][3] / a[r][r];
  return x;
}

Accelerations accelerations(const StateVector& s, double force, const ModelParams& p) {
  const Vec3 qdd = solve3(mass_matrix(s, p), generalized_forces(s, force, p));
  return {qdd[0], qdd[1], qdd[2]};
}

StateVector derivative(const StateVector& s, double force, const ModelParams& p) {
  const Accelerations a = accelerations(s, force, p);
  StateVector d;
  d.z = s.z_dot;
  d.z_dot = a.z_ddot;
  d.phi = s.phi_dot;
  d.phi_dot = a.phi_ddot;
  d.theta = s.theta_dot;
  d.theta_dot = a.theta_ddot;
  return d;
}

namespace {

StateVector add_scaled(const StateVector& x, const StateVector& d, double h) {
  StateVector r;
  r.z = x.z + h * d.z;
  r.z_dot = x.z_dot + h * d.z_dot;
  r.phi = x.phi + h * d.phi;
  r.phi_dot = x.phi_dot + h * d.phi_dot;
  r.theta = x.theta + h * d.theta;
  r.theta_dot = x.theta_dot + h * d.theta_dot;
  return r;
}

}  // namespace

StateVector rk4_step(const StateVector& s, double force, const ModelParams& p, double dt) {
  const StateVector k1 = derivative(s, force, p);
  const StateVector k2 = derivative(add_scaled(s, k1, 0.5 * dt), force, p);
  const StateVector k3 = derivative(add_scaled(s, k2, 0.5 * dt), force, p);
  const StateVector k4 = derivative(add_scaled(s, k3, dt), force, p);

  StateVector r;
  const double w = dt / 6.0;
  r.z = s.z + w * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);
  r.z_dot = s.z_dot + w * (k1.z_dot + 2.0 * k2.z_dot + 2.0 * k3.z_dot + k4.z_dot);
  r.phi = s.phi + w * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi);
  r.phi_dot = s.phi_dot + w * (k1.phi_dot + 2.0 * k2.phi_dot + 2.0 * k3.phi_dot + k4.phi_dot);
  r.theta = s.theta + w * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta);
  r.theta_dot = s.theta_dot + w * (k1.theta_dot + 2.0 * k2.theta_dot + 2.0 * k3.theta_dot + k4.theta_dot);
  return r;
}

double total_energy(const StateVector& s, const ModelParams& p) {
  const double st = std::sin(s.theta);
  const double ct = std::cos(s.theta);
  const double sp = std::sin(s.phi);
  const double cp = std::cos(s.phi);
  const double ctp = std::cos(s.theta - s.phi);

  const double kinetic =
      0.5 * p.m_c * s.z_dot * s.z_dot
      + 0.5 * p.m_b * (s.z_dot * s.z_dot
                       + 2.0 * p.l * s.z_dot * s.phi_dot * cp
                       + p.l * p.l * s.phi_dot * s.phi_dot)
      + 0.5 * p.m_t * (s.z_dot * s.z_dot
                       + 2.0 * s.z_dot * (p.L * s.theta_dot * ct + p.l * s.phi_dot * cp)
                       + p.L * p.L * s.theta_dot * s.theta_dot
                       + p.l * p.l * s.phi_dot * s.phi_dot
                       + 2.0 * p.L * p.l * s.theta_dot * s.phi_dot * ctp);

  // Gravity destabilizes both stations (datum at upright), the springs
  // restore through the lateral deflections L sin(theta) and l sin(phi).
  const double potential =
      -p.m_t * p.g * p.L * (1.0 - ct)
      - p.m_b * p.g * p.l * (1.0 - cp)
      + 0.5 * p.k1 * (p.L * st) * (p.L * st)
      + 0.5 * p.k2 * (p.l * sp) * (p.l * sp);

  return kinetic + potential;
}

}  // namespace fipwc
