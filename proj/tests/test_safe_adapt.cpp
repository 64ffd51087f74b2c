#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "drcorl/safe_adapt.hpp"
#include "drcorl/toy_env.hpp"

using namespace drcorl;

namespace {

// zeros every network in the ensemble and pins each cost member (online and
// target) to the constant output q, by editing a checkpoint
CriticEnsemble stub_critics(const CriticEnsemble& c, double q) {
    const auto path = std::filesystem::temp_directory_path() / "drcorl_stub_critics.json";
    c.save(path.string());
    nlohmann::json j;
    {
        std::ifstream in(path);
        in >> j;
    }
    for (auto* key : {"q_r1", "q_r2", "v_r", "q_r1_target", "q_r2_target"}) {
        auto params = j[key]["params"].get<std::vector<double>>();
        std::fill(params.begin(), params.end(), 0.0);
        j[key]["params"] = params;
    }
    for (auto* key : {"q_cost", "q_cost_target"}) {
        for (auto& net : j[key]) {
            auto params = net["params"].get<std::vector<double>>();
            std::fill(params.begin(), params.end(), 0.0);
            params.back() = q;
            net["params"] = params;
        }
    }
    {
        std::ofstream out(path);
        out << j;
    }
    CriticEnsemble back = CriticEnsemble::load(path.string());
    std::filesystem::remove(path);
    return back;
}

TransitionDataset tiny_dataset() {
    const PointMassEnv env;
    return rollout(env, point_mass_controller(0.4), 4, 16, 3);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("slack band decay") {
    const SlackBand band{0.2, 0.1, true};
    CHECK(band.h_plus(0, 100) == doctest::Approx(0.2));
    CHECK(band.h_plus(50, 100) == doctest::Approx(0.1));
    CHECK(band.h_plus(100, 100) == doctest::Approx(0.0));
    CHECK(band.h_minus(25, 100) == doctest::Approx(0.075));

    const SlackBand fixed{0.2, 0.1, false};
    CHECK(fixed.h_plus(99, 100) == doctest::Approx(0.2));
    CHECK(fixed.h_minus(99, 100) == doctest::Approx(0.1));
}

TEST_CASE("temperature schedules") {
    BetaSchedule b;
    b.kind = BetaSchedule::Kind::Constant;
    CHECK(b.value(77, 100) == doctest::Approx(0.04));

    b.kind = BetaSchedule::Kind::Linear;
    CHECK(b.value(0, 100) == doctest::Approx(0.04));
    CHECK(b.value(50, 100) == doctest::Approx(0.52));
    CHECK(b.value(100, 100) == doctest::Approx(1.0));

    b.kind = BetaSchedule::Kind::Sqrt;
    CHECK(b.value(25, 100) == doctest::Approx(0.04 + 0.96 * 0.5));

    CHECK(BetaSchedule::kind_from_name("sqrt") == BetaSchedule::Kind::Sqrt);
    CHECK_THROWS(BetaSchedule::kind_from_name("cosine"));
    CHECK(to_string(Region::Conflict) == "conflict");
}

TEST_CASE("policy gradients vanish when every signal is flat") {
    Rng rng(1);
    GaussianPolicy policy(1, 1, {4}, CovarianceMode::NearDirac, rng);
    CriticConfig ccfg;
    ccfg.hidden = {4};
    const CriticEnsemble critics = stub_critics(CriticEnsemble(1, 1, ccfg, rng), 0.0);
    Denoiser den(1, 1, {4}, 5, rng);
    den.net().params().setZero();
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);

    const std::vector<Eigen::VectorXd> states = {Eigen::VectorXd::Zero(1),
                                                 Eigen::VectorXd::Constant(1, 0.5)};
    const auto [g_r, g_c] =
        policy_gradients(policy, critics, den, schedule, states, 1.0, 4, rng);
    CHECK(g_r.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g_c.cwiseAbs().maxCoeff() == 0.0);

    CHECK_THROWS(policy_gradients(policy, critics, den, schedule, {}, 1.0, 4, rng));
    CHECK_THROWS(policy_gradients(policy, critics, den, schedule, states, 0.0, 4, rng));
}

TEST_CASE("flat critics leave only the shared regularizer term") {
    Rng rng(2);
    GaussianPolicy policy(1, 1, {4}, CovarianceMode::Constant, rng, 0.5);
    CriticConfig ccfg;
    ccfg.hidden = {4};
    const CriticEnsemble critics = stub_critics(CriticEnsemble(1, 1, ccfg, rng), 0.3);
    Rng drng(3);
    const Denoiser den(1, 1, {8}, 5, drng);  // random but shared by both signals
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);

    const std::vector<Eigen::VectorXd> states = {Eigen::VectorXd::Constant(1, 0.2)};
    const auto [g_r, g_c] =
        policy_gradients(policy, critics, den, schedule, states, 0.5, 8, rng);
    CHECK(g_r.size() == policy.param_count());
    CHECK((g_r - g_c).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g_r.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("huge temperature recovers the critic ascent direction") {
    Rng rng(4);
    GaussianPolicy policy(1, 1, {6}, CovarianceMode::NearDirac, rng);
    CriticConfig ccfg;
    ccfg.hidden = {8};
    CriticEnsemble critics(1, 1, ccfg, rng);
    Denoiser den(1, 1, {4}, 5, rng);
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);

    const std::vector<Eigen::VectorXd> states = {Eigen::VectorXd::Constant(1, 0.1),
                                                 Eigen::VectorXd::Constant(1, -0.6)};
    Rng grng(5);
    const auto [g_r, g_c] =
        policy_gradients(policy, critics, den, schedule, states, 1e9, 16, grng);

    // near-dirac actions sit at the mean, so g_r approximates the gradient of
    // the state-averaged reward critic at the policy mean
    auto objective = [&](const GaussianPolicy& q) {
        double sum = 0.0;
        for (const auto& s : states) sum += critics.reward_q(s, q.mean(s));
        return sum / double(states.size());
    };
    Eigen::VectorXd flat = policy.flat_params();
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < flat.size(); ++i) {
        const double orig = flat[i];
        GaussianPolicy q = policy;
        flat[i] = orig + h;
        q.set_flat_params(flat);
        const double up = objective(q);
        flat[i] = orig - h;
        q.set_flat_params(flat);
        const double down = objective(q);
        flat[i] = orig;
        CHECK(g_r[i] == doctest::Approx((up - down) / (2 * h)).epsilon(0.02).scale(1.0));
    }
}

TEST_CASE("region boundaries around the cost limit") {
    Rng rng(6);
    GaussianPolicy policy(1, 1, {4}, CovarianceMode::NearDirac, rng);
    Denoiser den(1, 1, {4}, 5, rng);
    den.net().params().setZero();
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);
    const auto data = tiny_dataset();

    CriticConfig ccfg;
    ccfg.hidden = {4};
    ccfg.gamma = 0.5;
    SafeAdaptConfig cfg;
    cfg.cost_limit = 1.0;
    cfg.horizon = 2.0;  // episodic estimate = q * (1 - 0.5) * 2 = q
    cfg.cost_batch = 16;
    cfg.policy_batch = 4;
    cfg.n_mc = 2;
    const double h = 0.25;  // dyadic so the boundary comparisons are exact

    auto region_for = [&](double q) {
        const CriticEnsemble critics = stub_critics(CriticEnsemble(1, 1, ccfg, rng), q);
        RegionEntry entry;
        Rng r(7);
        const Eigen::VectorXd g = safe_adaptation(policy, critics, den, schedule, data,
                                                  1.0, h, h, cfg, r, entry);
        CHECK(entry.cost_estimate == doctest::Approx(q).epsilon(1e-9));
        CHECK(g.cwiseAbs().maxCoeff() == 0.0);  // flat critics, zero score
        return entry;
    };

    CHECK(region_for(0.75).region == Region::Safe);       // exactly l - h^-
    CHECK(region_for(0.75).weight == 1.0);
    CHECK(region_for(1.25).region == Region::Align);      // exactly l + h^+
    CHECK(region_for(1.25).weight == 0.5);
    CHECK(region_for(1.3125).region == Region::Unsafe);
    CHECK(region_for(1.3125).weight == 0.0);
}

TEST_CASE("training loop regions follow the cost limit") {
    const PointMassEnv env;
    const auto data = tiny_dataset();
    Rng rng(8);
    Denoiser den(1, 1, {8}, 5, rng);
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);

    CriticConfig ccfg;
    ccfg.hidden = {8};
    ccfg.batch_size = 16;
    ccfg.ensemble_size = 2;

    TrainConfig cfg;
    cfg.steps = 12;
    cfg.eval_interval = 4;
    cfg.eval_episodes = 2;
    cfg.eval_horizon = 10;
    cfg.adapt.cost_batch = 16;
    cfg.adapt.policy_batch = 4;
    cfg.adapt.n_mc = 2;

    {
        CriticEnsemble critics(1, 1, ccfg, rng);
        GaussianPolicy policy(1, 1, {8}, CovarianceMode::Constant, rng, 0.3);
        cfg.adapt.cost_limit = 1e9;
        const TrainResult res = train(env, data, den, schedule, critics, policy, cfg, 1);
        CHECK(res.regions.entries.size() == 12);
        CHECK(res.regions.count(Region::Safe) == 12);
        CHECK(res.metrics.size() == 3);
        CHECK(res.metrics.back().step == 12);
    }
    {
        // pinned positive cost critics against a tiny budget: always unsafe
        CriticEnsemble critics = stub_critics(CriticEnsemble(1, 1, ccfg, rng), 1.0);
        GaussianPolicy policy(1, 1, {8}, CovarianceMode::Constant, rng, 0.3);
        cfg.update_critics = false;
        cfg.adapt.cost_limit = 0.5;
        cfg.band = SlackBand{0.0, 0.0, false};
        const TrainResult res = train(env, data, den, schedule, critics, policy, cfg, 1);
        CHECK(res.regions.count(Region::Unsafe) == 12);
        cfg.update_critics = true;
    }

    CriticEnsemble critics(1, 1, ccfg, rng);
    GaussianPolicy policy(1, 1, {8}, CovarianceMode::Constant, rng, 0.3);
    CHECK_THROWS(train(env, TransitionDataset{}, den, schedule, critics, policy, cfg, 1));
}

TEST_CASE("training is deterministic and csv output is stable") {
    const PointMassEnv env;
    const auto data = tiny_dataset();
    Rng rng(9);
    Denoiser den(1, 1, {8}, 5, rng);
    const NoiseSchedule schedule = NoiseSchedule::from_name("linear", 5);
    CriticConfig ccfg;
    ccfg.hidden = {8};
    ccfg.batch_size = 16;
    ccfg.ensemble_size = 2;

    TrainConfig cfg;
    cfg.steps = 8;
    cfg.eval_interval = 4;
    cfg.eval_episodes = 2;
    cfg.eval_horizon = 10;
    cfg.adapt.cost_limit = 5.0;
    cfg.adapt.cost_batch = 16;
    cfg.adapt.policy_batch = 4;
    cfg.adapt.n_mc = 2;

    auto run = [&]() {
        Rng r(10);
        CriticEnsemble critics(1, 1, ccfg, r);
        GaussianPolicy policy(1, 1, {8}, CovarianceMode::Constant, r, 0.3);
        return train(env, data, den, schedule, critics, policy, cfg, 2);
    };
    const TrainResult a = run();
    const TrainResult b = run();

    const auto dir = std::filesystem::temp_directory_path();
    const std::string ma = (dir / "drcorl_metrics_a.csv").string();
    const std::string mb = (dir / "drcorl_metrics_b.csv").string();
    const std::string ra = (dir / "drcorl_regions_a.csv").string();
    const std::string rb = (dir / "drcorl_regions_b.csv").string();
    save_metrics_csv(a.metrics, ma);
    save_metrics_csv(b.metrics, mb);
    save_region_csv(a.regions, ra);
    save_region_csv(b.regions, rb);
    const std::string metrics_text = slurp(ma);
    CHECK(metrics_text == slurp(mb));
    CHECK(slurp(ra) == slurp(rb));
    CHECK(metrics_text.rfind("step,normalized_return,normalized_cost,region,beta,"
                             "h_plus,h_minus\n", 0) == 0);
    for (const auto& p : {ma, mb, ra, rb}) std::filesystem::remove(p);
}
