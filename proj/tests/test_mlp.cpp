#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "drcorl/mlp.hpp"
#include "drcorl/rng.hpp"

using namespace drcorl;

namespace {

double half_sq_norm(const Mlp& net, const Eigen::VectorXd& x) {
    return 0.5 * net.forward(x).squaredNorm();
}

}  // namespace

TEST_CASE("forward basics") {
    Mlp zero({3, 4, 2});
    CHECK(zero.forward(Eigen::VectorXd::Ones(3)).cwiseAbs().maxCoeff() == 0.0);

    Mlp identity({2, 2});
    identity.params().setZero();
    // weight is stored column-major ahead of the bias
    identity.params()[0] = 1.0;
    identity.params()[3] = 1.0;
    Eigen::VectorXd x(2);
    x << 0.3, -1.7;
    CHECK((identity.forward(x) - x).cwiseAbs().maxCoeff() == 0.0);

    Rng rng(1);
    Mlp net({3, 8, 2});
    net.init_uniform(rng);
    const Eigen::VectorXd in = rng.normal_vector(3);
    CHECK((net.forward(in) - net.forward(in)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("parameter gradients match finite differences") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Eigen::Index> widths = {Eigen::Index(1 + rng.index(5))};
        const auto depth = 1 + rng.index(3);
        for (std::size_t d = 0; d < depth; ++d) widths.push_back(Eigen::Index(1 + rng.index(16)));
        widths.push_back(Eigen::Index(1 + rng.index(3)));
        Mlp net(widths);
        net.init_uniform(rng);
        const Eigen::VectorXd x = rng.normal_vector(widths.front());
        const Eigen::VectorXd g = net.grad_params(x, net.forward(x));  // d 0.5||f||^2

        const double h = 1e-5;
        for (Eigen::Index i = 0; i < net.param_count(); i += 1 + Eigen::Index(rng.index(7))) {
            const double orig = net.params()[i];
            net.params()[i] = orig + h;
            const double up = half_sq_norm(net, x);
            net.params()[i] = orig - h;
            const double down = half_sq_norm(net, x);
            net.params()[i] = orig;
            const double fd = (up - down) / (2 * h);
            CHECK(g[i] == doctest::Approx(fd).epsilon(1e-4).scale(1.0));
        }
    }
}

TEST_CASE("gradient edge cases") {
    Rng rng(3);
    Mlp net({4, 6, 3});
    net.init_uniform(rng);
    const Eigen::VectorXd x = rng.normal_vector(4);
    CHECK(net.grad_params(x, Eigen::VectorXd::Zero(3)).cwiseAbs().maxCoeff() == 0.0);

    // single linear layer: d(w.x)/dw = x, bias gradient = 1
    Mlp lin({3, 1});
    lin.init_uniform(rng);
    const Eigen::VectorXd g = lin.grad_params(x.head(3), Eigen::VectorXd::Ones(1));
    CHECK((g.head(3) - x.head(3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g[3] == doctest::Approx(1.0));
}

TEST_CASE("input gradients") {
    Rng rng(4);
    Mlp lin({3, 2});
    lin.init_uniform(rng);
    const Eigen::VectorXd gi =
        lin.grad_input(Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(2));
    // d(sum y)/dx = column sums of W
    for (Eigen::Index c = 0; c < 3; ++c) {
        const double col_sum = lin.params()[c * 2] + lin.params()[c * 2 + 1];
        CHECK(gi[c] == doctest::Approx(col_sum).epsilon(1e-12));
    }

    Mlp zero({3, 5, 2});
    CHECK(zero.grad_input(rng.normal_vector(3), Eigen::VectorXd::Ones(2))
              .cwiseAbs()
              .maxCoeff() == 0.0);

    // finite differences of sum(f(x)) w.r.t. the input
    Mlp net({4, 10, 10, 2});
    net.init_uniform(rng);
    Eigen::VectorXd x = rng.normal_vector(4);
    const Eigen::VectorXd g = net.grad_input(x, Eigen::VectorXd::Ones(2));
    const double h = 1e-5;
    for (Eigen::Index i = 0; i < 4; ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = net.forward(x).sum();
        x[i] = orig - h;
        const double down = net.forward(x).sum();
        x[i] = orig;
        CHECK(g[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-4).scale(1.0));
    }
}

TEST_CASE("adam descends and is deterministic") {
    auto run = [] {
        Rng rng(5);
        Mlp net({2, 8, 1});
        net.init_uniform(rng);
        Adam opt(net.param_count(), {.lr = 1e-2});
        const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.5, -0.25).finished();
        for (int i = 0; i < 500; ++i) {
            const Eigen::VectorXd res = net.forward(x) - Eigen::VectorXd::Constant(1, 3.0);
            const Eigen::VectorXd g = net.grad_params(x, 2.0 * res);
            opt.step(net.params(), g);
        }
        return net;
    };
    const Mlp a = run();
    const Mlp b = run();
    CHECK((a.params() - b.params()).cwiseAbs().maxCoeff() == 0.0);
    const Eigen::VectorXd x = (Eigen::VectorXd(2) << 0.5, -0.25).finished();
    CHECK(a.forward(x)[0] == doctest::Approx(3.0).epsilon(1e-3));
}

TEST_CASE("checkpoint round trip") {
    Rng rng(6);
    Mlp net({3, 7, 2});
    net.init_uniform(rng);
    const std::string path =
        (std::filesystem::temp_directory_path() / "drcorl_mlp_test.json").string();
    net.save(path);
    const Mlp back = Mlp::load(path);
    std::filesystem::remove(path);
    CHECK(back.widths() == net.widths());
    CHECK((back.params() - net.params()).cwiseAbs().maxCoeff() == 0.0);
}
