// Unregularized LET dual: maximize sum_i a_i (1 - e^{-f_i}) + sum_j psi_j(g_j, lam) + xi(lam)
// subject to f_i + g_j <= c_e on a list of finite-cost edges.
#pragma once

#include <Eigen/Dense>
#include <vector>

namespace hkflow::detail {

struct TargetEval {
  double v = 0, dg = 0, dgg = 0, dl = 0, dll = 0, dgl = 0;
};

class TargetModel {
 public:
  virtual ~TargetModel() = default;
  virtual bool has_lambda() const { return false; }
  // False when (g, lam) lies outside the domain of psi_j.
  virtual bool eval(int j, double g, double lam, TargetEval& out) const = 0;
  virtual bool eval_xi(double lam, double& v, double& dl, double& dll) const {
    (void)lam;
    v = dl = dll = 0.0;
    return true;
  }
};

// psi_j = b_j (1 - e^{-g}).
class MassTarget : public TargetModel {
 public:
  explicit MassTarget(Eigen::VectorXd b) : b_(std::move(b)) {}
  bool eval(int j, double g, double lam, TargetEval& out) const override;

 private:
  Eigen::VectorXd b_;
};

struct DualProblem {
  Eigen::VectorXd a;           // source masses, all > 0
  int ng = 0;                  // number of targets
  std::vector<int> ei, ej;     // edge endpoints
  std::vector<double> ec;      // edge costs
  const TargetModel* target = nullptr;

  int nf() const { return static_cast<int>(a.size()); }
  int nvar() const { return nf() + ng + (target->has_lambda() ? 1 : 0); }
  int nedge() const { return static_cast<int>(ec.size()); }
};

struct BarrierOptions {
  double t0 = 0.0;          // 0 picks a value from the problem scale
  double mu = 10.0;
  double gap_target = 1e-8;  // stop when m / t is below this
  int max_newton = 200;      // per centering stage
  double newton_tol = 1e-10;
};

struct DualSolution {
  Eigen::VectorXd x;        // [f; g; lam]
  Eigen::VectorXd plan;     // per edge
  double dual_value = 0.0;
  double t = 0.0;
  int newton_steps = 0;
  bool converged = false;
  bool exact = false;       // active-set KKT solve succeeded
};

double dual_value(const DualProblem& p, const Eigen::VectorXd& x);
Eigen::VectorXd edge_slacks(const DualProblem& p, const Eigen::VectorXd& x);

// Shift f so every edge has slack >= margin (g and lam untouched).
void make_feasible(const DualProblem& p, Eigen::VectorXd& x, double margin);

DualSolution barrier_solve(const DualProblem& p, const Eigen::VectorXd& x0,
                           const BarrierOptions& opt);

// Active-set Newton on the KKT system starting from a barrier solution.
bool crossover(const DualProblem& p, DualSolution& sol, double mass_scale);

// Barrier followed by crossover; falls back to a deeper barrier if the crossover fails.
DualSolution solve_dual(const DualProblem& p, const Eigen::VectorXd& x0, BarrierOptions opt,
                        double mass_scale);

}  // namespace hkflow::detail
