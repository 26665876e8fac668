#include "tvphase/tvsolve.hpp"

#include <algorithm>
#include <cmath>

#include "tvphase/error.hpp"

namespace tvphase {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(SolveStatus s)
{
    switch (s) {
    case SolveStatus::Optimal: return "Optimal";
    case SolveStatus::MaxIter: return "MaxIter";
    case SolveStatus::Infeasible: return "Infeasible";
    }
    return "Unknown";
}

SolveStatus solve_status_from_string(const std::string& s)
{
    if (s == "Optimal") { return SolveStatus::Optimal; }
    if (s == "MaxIter") { return SolveStatus::MaxIter; }
    if (s == "Infeasible") { return SolveStatus::Infeasible; }
    throw FormatError("unknown solver status '" + s + "'");
}

double tv_norm(std::span<const double> x)
{
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < x.size(); ++i) { total += std::abs(x[i + 1] - x[i]); }
    return total;
}

double tv_norm(const VectorXd& x)
{
    return tv_norm(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
}

bool check_recovery(std::span<const double> x, std::span<const double> x_hat, double tol)
{
    if (x.size() != x_hat.size()) {
        throw DimensionError("check_recovery: length mismatch (" + std::to_string(x.size()) + " vs "
            + std::to_string(x_hat.size()) + ")");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double e = x[i] - x_hat[i];
        sq += e * e;
    }
    return std::sqrt(sq) <= tol;
}

namespace {

// forward differences and their adjoint
VectorXd diff(const VectorXd& z) { return z.tail(z.size() - 1) - z.head(z.size() - 1); }

VectorXd diff_adjoint(const VectorXd& q)
{
    const Eigen::Index n = q.size() + 1;
    VectorXd out(n);
    out(0) = -q(0);
    for (Eigen::Index j = 1; j + 1 < n; ++j) { out(j) = q(j - 1) - q(j); }
    out(n - 1) = q(n - 2);
    return out;
}

double max_step(const VectorXd& v, const VectorXd& dv)
{
    double alpha = 1.0;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (dv(i) < 0.0) { alpha = std::min(alpha, -v(i) / dv(i)); }
    }
    return alpha;
}

class InteriorPoint {
public:
    InteriorPoint(const MatrixXd& A, const VectorXd& y, const TvSolverOptions& opts)
        : A_(A), y_(y), opts_(opts), n_(A.cols()), m_(A.rows())
    {
    }

    bool factor_gram()
    {
        Eigen::ColPivHouseholderQR<MatrixXd> qr(A_.transpose());
        if (qr.rank() < m_) { return false; }
        gram_.compute(A_ * A_.transpose());
        return gram_.info() == Eigen::Success;
    }

    // closest point of {A z = y} to z
    VectorXd project_feasible(const VectorXd& z) const
    {
        return z - A_.transpose() * gram_.solve(A_ * z - y_);
    }

    // -y'nu after making (nu, q) exactly dual feasible
    double certified_dual_bound(const VectorXd& nu) const
    {
        const VectorXd a = A_.rowwise().sum(); // A 1
        VectorXd nu_p = nu;
        const double aa = a.squaredNorm();
        if (aa > 0.0) { nu_p -= (a.dot(nu) / aa) * a; }
        const VectorXd r = -(A_.transpose() * nu_p);
        double running = 0.0;
        double q_max = 0.0;
        for (Eigen::Index j = 0; j + 1 < n_; ++j) {
            running -= r(j);
            q_max = std::max(q_max, std::abs(running));
        }
        const double kappa = std::max(1.0, q_max);
        return -y_.dot(nu_p) / kappa;
    }

    TvSolution run()
    {
        TvSolution sol;
        if (!factor_gram()) {
            sol.status = SolveStatus::Infeasible;
            sol.x_hat = VectorXd::Zero(n_);
            return sol;
        }
        const Eigen::Index k = n_ - 1;

        VectorXd z = A_.transpose() * gram_.solve(y_);
        const VectorXd d0 = diff(z);
        const double shift = std::max(1e-2, 0.1 * d0.cwiseAbs().maxCoeff());
        VectorXd u = d0.cwiseAbs().array() + shift;
        VectorXd s1 = u - d0;
        VectorXd s2 = u + d0;
        VectorXd l1 = VectorXd::Constant(k, 0.5);
        VectorXd l2 = VectorXd::Constant(k, 0.5);
        VectorXd nu = VectorXd::Zero(m_);

        MatrixXd K = MatrixXd::Zero(n_ + m_, n_ + m_);
        K.bottomLeftCorner(m_, n_) = A_;
        K.topRightCorner(n_, m_) = A_.transpose();

        VectorXd best_x = project_feasible(z);
        double best_gap = std::numeric_limits<double>::infinity();
        double best_dual = -std::numeric_limits<double>::infinity();

        for (int iter = 0; iter < opts_.max_iter; ++iter) {
            sol.iterations = iter + 1;

            const VectorXd dz_cur = diff(z);
            const VectorXd rz = diff_adjoint(l1 - l2) + A_.transpose() * nu;
            const VectorXd ru = VectorXd::Ones(k) - l1 - l2;
            const VectorXd req = A_ * z - y_;
            const VectorXd r1 = dz_cur - u + s1;
            const VectorXd r2 = -dz_cur - u + s2;
            const double mu = (s1.dot(l1) + s2.dot(l2)) / static_cast<double>(2 * k);

            // certify the current iterate
            const VectorXd x_feas = project_feasible(z);
            const double dual = certified_dual_bound(nu);
            const double gap = tv_norm(x_feas) - dual;
            if (gap < best_gap) {
                best_gap = gap;
                best_x = x_feas;
                best_dual = dual;
            }
            if (std::abs(gap) <= opts_.gap_tol) { break; }

            const VectorXd D1 = l1.cwiseQuotient(s1);
            const VectorXd D2 = l2.cwiseQuotient(s2);
            const VectorXd Dsum = D1 + D2;
            const VectorXd W = (4.0 * D1.cwiseProduct(D2)).cwiseQuotient(Dsum);

            K.topLeftCorner(n_, n_).setZero();
            for (Eigen::Index j = 0; j < k; ++j) {
                K(j, j) += W(j);
                K(j + 1, j + 1) += W(j);
                K(j, j + 1) -= W(j);
                K(j + 1, j) -= W(j);
            }
            Eigen::PartialPivLU<MatrixXd> lu(K);

            struct Direction {
                VectorXd z, u, s1, s2, l1, l2, nu;
            };
            auto solve_direction = [&](const VectorXd& rc1, const VectorXd& rc2) {
                const VectorXd a1 = (l1.cwiseProduct(r1) - rc1).cwiseQuotient(s1);
                const VectorXd a2 = (l2.cwiseProduct(r2) - rc2).cwiseQuotient(s2);
                const VectorXd asum = a1 + a2 - ru;
                const VectorXd b = a1 - a2 - (D1 - D2).cwiseProduct(asum).cwiseQuotient(Dsum);
                VectorXd rhs(n_ + m_);
                rhs.head(n_) = -rz - diff_adjoint(b);
                rhs.tail(m_) = -req;
                VectorXd sol_vec = lu.solve(rhs);
                sol_vec += lu.solve(rhs - K * sol_vec); // one refinement sweep
                Direction dir;
                dir.z = sol_vec.head(n_);
                dir.nu = sol_vec.tail(m_);
                const VectorXd ddz = diff(dir.z);
                dir.u = ((D1 - D2).cwiseProduct(ddz) + asum).cwiseQuotient(Dsum);
                dir.s1 = -r1 - ddz + dir.u;
                dir.s2 = -r2 + ddz + dir.u;
                dir.l1 = D1.cwiseProduct(ddz - dir.u) + a1;
                dir.l2 = -D2.cwiseProduct(ddz + dir.u) + a2;
                return dir;
            };

            // predictor
            const Direction aff = solve_direction(s1.cwiseProduct(l1), s2.cwiseProduct(l2));
            const double ap_aff = std::min(max_step(s1, aff.s1), max_step(s2, aff.s2));
            const double ad_aff = std::min(max_step(l1, aff.l1), max_step(l2, aff.l2));
            const double mu_aff = ((s1 + ap_aff * aff.s1).dot(l1 + ad_aff * aff.l1)
                                      + (s2 + ap_aff * aff.s2).dot(l2 + ad_aff * aff.l2))
                / static_cast<double>(2 * k);
            const double sigma = std::pow(std::clamp(mu_aff / mu, 0.0, 1.0), 3);

            // corrector
            const VectorXd rc1 = s1.cwiseProduct(l1) + aff.s1.cwiseProduct(aff.l1)
                - VectorXd::Constant(k, sigma * mu);
            const VectorXd rc2 = s2.cwiseProduct(l2) + aff.s2.cwiseProduct(aff.l2)
                - VectorXd::Constant(k, sigma * mu);
            const Direction dir = solve_direction(rc1, rc2);

            const double ap = std::min(1.0,
                opts_.step_fraction * std::min(max_step(s1, dir.s1), max_step(s2, dir.s2)));
            const double ad = std::min(1.0,
                opts_.step_fraction * std::min(max_step(l1, dir.l1), max_step(l2, dir.l2)));
            if (!(ap > 0.0) || !(ad > 0.0)) { break; }

            z += ap * dir.z;
            u += ap * dir.u;
            s1 += ap * dir.s1;
            s2 += ap * dir.s2;
            l1 += ad * dir.l1;
            l2 += ad * dir.l2;
            nu += ad * dir.nu;
            if (!z.allFinite() || !nu.allFinite()) { break; }
        }

        sol.x_hat = best_x;
        sol.gap = best_gap;
        sol.dual_bound = best_dual;
        sol.objective = tv_norm(best_x);
        sol.status = std::abs(best_gap) <= opts_.gap_tol ? SolveStatus::Optimal : SolveStatus::MaxIter;
        return sol;
    }

private:
    const MatrixXd& A_;
    const VectorXd& y_;
    const TvSolverOptions& opts_;
    Eigen::Index n_;
    Eigen::Index m_;
    Eigen::LLT<MatrixXd> gram_;
};

} // namespace

TvSolution solve_tv(const TvProblem& problem, const TvSolverOptions& opts)
{
    const auto& A = problem.A;
    const auto& y = problem.y;
    if (A.cols() < 3) { throw DimensionError("solve_tv: n must be at least 3"); }
    if (A.rows() < 1) { throw DimensionError("solve_tv: need at least one measurement"); }
    if (A.rows() != y.size()) {
        throw DimensionError("solve_tv: A has " + std::to_string(A.rows()) + " rows but y has "
            + std::to_string(y.size()) + " entries");
    }
    if (A.rows() > A.cols()) {
        throw DimensionError("solve_tv: more measurements than unknowns (m > n)");
    }

    MatrixXd As = A;
    VectorXd ys = y;
    if (opts.scale_rows) {
        for (Eigen::Index i = 0; i < As.rows(); ++i) {
            const double norm = As.row(i).norm();
            if (norm > 0.0) {
                As.row(i) /= norm;
                ys(i) /= norm;
            }
        }
    }

    InteriorPoint ip(As, ys, opts);
    TvSolution sol = ip.run();
    if (sol.status == SolveStatus::Infeasible) { return sol; }

    sol.feas_residual = (A * sol.x_hat - y).norm();
    if (sol.status == SolveStatus::Optimal && sol.feas_residual > opts.feas_tol * (1.0 + y.norm())) {
        sol.status = SolveStatus::MaxIter;
    }
    return sol;
}

nlohmann::json status_record(const TvSolution& sol)
{
    return {
        {"status", to_string(sol.status)},
        {"objective", sol.objective},
        {"feas_residual", sol.feas_residual},
        {"gap", sol.gap},
        {"dual_bound", sol.dual_bound},
        {"iterations", sol.iterations},
    };
}

} // namespace tvphase
