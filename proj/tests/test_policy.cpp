#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "drcorl/gaussian_policy.hpp"

using namespace drcorl;

namespace {

// 1-d policy with a single linear mean layer (weight 0, bias = m) and
// constant variance sigma.
GaussianPolicy scalar_policy(double m, double sigma, CovarianceMode mode) {
    Rng rng(0);
    GaussianPolicy p(1, 1, {}, mode, rng, sigma);
    Eigen::VectorXd flat = p.flat_params();
    flat.setZero();
    flat[1] = m;  // bias of the 1x1 mean layer
    if (mode == CovarianceMode::Constant) flat[2] = std::log(sigma);
    p.set_flat_params(flat);
    return p;
}

const GaussianPolicy::ScoreFn standard_normal_score =
    [](const Eigen::VectorXd& a, const Eigen::VectorXd&) { return (-a).eval(); };

}  // namespace

TEST_CASE("entropy closed form") {
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
    CHECK(scalar_policy(0.0, 1.0, CovarianceMode::Constant).entropy(s) ==
          doctest::Approx(1.418939).epsilon(1e-6));
    CHECK(scalar_policy(0.0, 2.0, CovarianceMode::Constant).entropy(s) ==
          doctest::Approx(1.418939 + std::log(2.0)).epsilon(1e-6));

    Rng rng(1);
    GaussianPolicy p2(1, 2, {}, CovarianceMode::Constant, rng, 1.0);
    Eigen::VectorXd flat = p2.flat_params();
    flat.tail(2).setZero();  // sigma = 1 in both dims
    p2.set_flat_params(flat);
    CHECK(p2.entropy(s) == doctest::Approx(2.837877).epsilon(1e-6));
}

TEST_CASE("log prob and sampling") {
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
    const GaussianPolicy p = scalar_policy(0.5, 1.0, CovarianceMode::Constant);
    CHECK(p.log_prob(s, Eigen::VectorXd::Constant(1, 0.5)) ==
          doctest::Approx(-0.918939).epsilon(1e-6));

    // density integrates to 1 on a grid
    double integral = 0.0;
    const double h = 0.01;
    for (double a = -6.0; a <= 7.0; a += h) {
        integral += std::exp(p.log_prob(s, Eigen::VectorXd::Constant(1, a))) * h;
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(0.01));

    Rng rng(2);
    double mean = 0.0;
    for (int i = 0; i < 10000; ++i) mean += p.sample(s, rng)[0];
    CHECK(mean / 10000.0 == doctest::Approx(0.5).epsilon(0.1).scale(1.0));
}

TEST_CASE("reverse KL gradient against the analytic Gaussian case") {
    // KL(N(m,1) || N(0,1)) = m^2/2, so the mean-bias gradient is m.
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
    for (double m : {-1.0, 0.0, 0.5, 2.0}) {
        const GaussianPolicy p = scalar_policy(m, 1.0, CovarianceMode::Constant);
        Rng rng(42);
        const Eigen::VectorXd g = p.reverse_kl_grad(standard_normal_score, s, 1024, rng);
        // per-sample gradient of the bias is m + z: variance 1, se = 1/32
        CHECK(std::abs(g[1] - m) < 3.0 / 32.0);
    }
}

TEST_CASE("entropy gradient matches finite differences") {
    const Eigen::VectorXd s = (Eigen::VectorXd(2) << 0.3, -0.8).finished();
    Rng rng(3);
    for (CovarianceMode mode : {CovarianceMode::Constant, CovarianceMode::StateDependent}) {
        GaussianPolicy p(2, 2, {8}, mode, rng, 0.5);
        Eigen::VectorXd g = Eigen::VectorXd::Zero(p.param_count());
        p.accumulate_entropy_grad(s, 1.0, g);
        Eigen::VectorXd flat = p.flat_params();
        const double h = 1e-6;
        for (Eigen::Index i = 0; i < flat.size(); ++i) {
            const double orig = flat[i];
            flat[i] = orig + h;
            p.set_flat_params(flat);
            const double up = p.entropy(s);
            flat[i] = orig - h;
            p.set_flat_params(flat);
            const double down = p.entropy(s);
            flat[i] = orig;
            p.set_flat_params(flat);
            CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4).scale(1.0));
        }
    }
}

TEST_CASE("constant-variance entropy gradient ignores mean parameters") {
    Rng rng(4);
    GaussianPolicy p(2, 1, {8}, CovarianceMode::Constant, rng, 0.3);
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.param_count());
    p.accumulate_entropy_grad(Eigen::VectorXd::Zero(2), 1.0, g);
    CHECK(g.head(g.size() - 1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g[g.size() - 1] == doctest::Approx(1.0));
}

TEST_CASE("KL gradient matches common-random-number finite differences") {
    const Eigen::VectorXd s = (Eigen::VectorXd(2) << 0.1, -0.4).finished();
    Rng zrng(5);
    const std::size_t n = 64;
    std::vector<Eigen::VectorXd> zs;
    for (std::size_t i = 0; i < n; ++i) zs.push_back(zrng.normal_vector(1));

    Rng rng(6);
    GaussianPolicy p(2, 1, {6}, CovarianceMode::Constant, rng, 0.7);

    // analytic gradient with frozen noise draws
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.param_count());
    for (const auto& z : zs) {
        const Eigen::VectorXd a = p.sample_with_noise(s, z);
        p.accumulate_action_grad(s, z, -standard_normal_score(a, s) / double(n), g);
    }
    p.accumulate_entropy_grad(s, -1.0, g);

    // KL estimate with the same draws: mean of [log pi(a) - log N(a;0,I)]
    auto kl_hat = [&](const GaussianPolicy& q) {
        double sum = 0.0;
        for (const auto& z : zs) {
            const Eigen::VectorXd a = q.sample_with_noise(s, z);
            const double log_mu =
                -0.5 * a.squaredNorm() -
                0.5 * std::log(2.0 * std::numbers::pi) * double(a.size());
            sum += q.log_prob(s, a) - log_mu;
        }
        return sum / double(n);
    };

    Eigen::VectorXd flat = p.flat_params();
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        const double orig = flat[i];
        GaussianPolicy q = p;
        flat[i] = orig + h;
        q.set_flat_params(flat);
        const double up = kl_hat(q);
        flat[i] = orig - h;
        q.set_flat_params(flat);
        const double down = kl_hat(q);
        flat[i] = orig;
        CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-3).scale(1.0));
    }
}

TEST_CASE("near-dirac mode") {
    Rng rng(7);
    GaussianPolicy p(1, 1, {4}, CovarianceMode::NearDirac, rng);
    const Eigen::VectorXd s = Eigen::VectorXd::Zero(1);
    CHECK(p.stddev(s)[0] == doctest::Approx(1e-3));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(p.param_count());
    p.accumulate_entropy_grad(s, 1.0, g);
    CHECK(g.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("policy checkpoint round trip") {
    Rng rng(8);
    GaussianPolicy p(2, 2, {8}, CovarianceMode::StateDependent, rng);
    const std::string path =
        (std::filesystem::temp_directory_path() / "drcorl_policy_test.json").string();
    p.save(path);
    const GaussianPolicy back = GaussianPolicy::load(path);
    std::filesystem::remove(path);
    const Eigen::VectorXd s = rng.normal_vector(2);
    CHECK((back.mean(s) - p.mean(s)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.stddev(s) - p.stddev(s)).cwiseAbs().maxCoeff() == 0.0);
}
