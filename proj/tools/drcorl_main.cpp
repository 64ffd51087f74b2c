#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drcorl/cmdp.hpp"
#include "drcorl/config.hpp"
#include "drcorl/critics.hpp"
#include "drcorl/dataset.hpp"
#include "drcorl/diffusion.hpp"
#include "drcorl/gaussian_policy.hpp"
#include "drcorl/npg.hpp"
#include "drcorl/safe_adapt.hpp"
#include "drcorl/toy_env.hpp"

namespace fs = std::filesystem;
using namespace drcorl;

namespace {

struct Context {
    Config cfg;
    std::uint64_t seed = 0;
    fs::path out;

    fs::path artifact(const std::string& name) const { return out / name; }
};

std::uint64_t resolve_seed(const Config& cfg, bool seed_given, std::uint64_t cli_seed) {
    if (seed_given) return cli_seed;
    if (const char* env = std::getenv("DRCORL_SEED")) {
        return std::stoull(env);
    }
    return std::uint64_t(cfg.get_int_or("run.seed", 0));
}

std::unique_ptr<Env> make_env(const Config& cfg) {
    const std::string kind = cfg.get_string_or("env.kind", "point_mass");
    if (kind == "point_mass") return std::make_unique<PointMassEnv>();
    if (kind == "tabular") {
        return std::make_unique<TabularEnv>(load_cmdp(cfg.get_string("env.file")));
    }
    throw std::runtime_error("config key 'env.kind' must be point_mass or tabular, got '" +
                             kind + "'");
}

BehaviorPolicyFn make_behavior(const Config& cfg, const Env& env) {
    if (const auto* tab = dynamic_cast<const TabularEnv*>(&env)) {
        const std::string kind = cfg.get_string_or("data.behavior", "uniform");
        if (kind != "uniform") {
            throw std::runtime_error(
                "config key 'data.behavior' only supports uniform for tabular envs");
        }
        return make_tabular_behavior(TabularPolicy::uniform(tab->cmdp().n_states,
                                                            tab->cmdp().n_actions));
    }
    return point_mass_controller(cfg.get_double_or("data.behavior_target", 0.4),
                                 cfg.get_double_or("data.behavior_gain", 5.0),
                                 cfg.get_double_or("data.behavior_noise", 0.6));
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) {
        throw std::runtime_error("missing " + what + ": " + path.string());
    }
}

NoiseSchedule make_schedule(const Config& cfg) {
    return NoiseSchedule::from_name(cfg.get_string_or("diffusion.schedule", "linear"),
                                    int(cfg.get_int_or("diffusion.steps", 20)));
}

std::vector<Eigen::Index> hidden_widths(const Config& cfg, const std::string& key,
                                        Eigen::Index fallback = 64) {
    const long w = cfg.get_int_or(key + ".hidden", fallback);
    const long depth = cfg.get_int_or(key + ".depth", 2);
    return std::vector<Eigen::Index>(std::size_t(depth), Eigen::Index(w));
}

CriticConfig critic_config(const Config& cfg) {
    CriticConfig c;
    c.hidden = hidden_widths(cfg, "critic");
    c.ensemble_size = int(cfg.get_int_or("critic.ensemble", 4));
    c.ucb_k = cfg.get_double_or("critic.ucb_k", 2.0);
    c.pessimism_alpha = cfg.get_double_or("critic.alpha", 0.2);
    c.expectile_tau = cfg.get_double_or("critic.expectile_tau", 0.7);
    c.soft_update_tau = cfg.get_double_or("critic.soft_update_tau", 0.005);
    c.gamma = cfg.get_double_or("critic.gamma", 0.99);
    c.batch_size = std::size_t(cfg.get_int_or("critic.batch", 256));
    c.adam.lr = cfg.get_double_or("critic.lr", 6e-4);
    return c;
}

ActionSampler dataset_marginal_sampler(const TransitionDataset& dataset) {
    return [&dataset](const Eigen::VectorXd&, Rng& rng) {
        return dataset[rng.index(dataset.size())].action;
    };
}

int cmd_gen_data(const Context& ctx) {
    const auto env = make_env(ctx.cfg);
    const auto behavior = make_behavior(ctx.cfg, *env);
    const auto dataset = rollout(*env, behavior,
                                 std::size_t(ctx.cfg.get_int_or("data.episodes", 100)),
                                 std::size_t(ctx.cfg.get_int_or("data.horizon", 200)),
                                 ctx.seed);
    dataset.save_csv(ctx.artifact("dataset.csv").string());
    std::cout << "wrote " << ctx.artifact("dataset.csv").string() << " ("
              << dataset.size() << " transitions)\n";
    return 0;
}

int cmd_pretrain_diffusion(const Context& ctx) {
    const fs::path data_path = ctx.artifact("dataset.csv");
    require_file(data_path, "dataset (run gen-data first)");
    const auto dataset = TransitionDataset::load_csv(data_path.string());
    const auto schedule = make_schedule(ctx.cfg);
    Rng rng(ctx.seed + 1);
    Denoiser denoiser(dataset[0].action.size(), dataset[0].state.size(),
                      hidden_widths(ctx.cfg, "diffusion"), schedule.steps(), rng);
    DiffusionTrainConfig dcfg;
    dcfg.steps = std::size_t(ctx.cfg.get_int_or("diffusion.train_steps", 5000));
    dcfg.batch_size = std::size_t(ctx.cfg.get_int_or("diffusion.batch", 128));
    dcfg.adam.lr = ctx.cfg.get_double_or("diffusion.lr", 6e-4);
    const auto losses = train_denoiser(dataset, schedule, denoiser, dcfg, rng);
    denoiser.save(ctx.artifact("denoiser.json").string());
    std::cout << "wrote " << ctx.artifact("denoiser.json").string()
              << " (final loss " << std::setprecision(6) << losses.back() << ")\n";
    return 0;
}

int cmd_pretrain_critics(const Context& ctx) {
    const fs::path data_path = ctx.artifact("dataset.csv");
    require_file(data_path, "dataset (run gen-data first)");
    const auto dataset = TransitionDataset::load_csv(data_path.string());
    Rng rng(ctx.seed + 2);
    CriticEnsemble critics(dataset[0].state.size(), dataset[0].action.size(),
                           critic_config(ctx.cfg), rng);
    const auto sampler = dataset_marginal_sampler(dataset);
    const auto reward_steps = std::size_t(ctx.cfg.get_int_or("critic.reward_steps", 3000));
    const auto cost_steps = std::size_t(ctx.cfg.get_int_or("critic.cost_steps", 3000));
    for (std::size_t i = 0; i < reward_steps; ++i) critics.train_reward_step(dataset, rng);
    for (std::size_t i = 0; i < cost_steps; ++i) {
        critics.train_cost_step(dataset, sampler, rng);
    }
    critics.save(ctx.artifact("critics.json").string());
    std::cout << "wrote " << ctx.artifact("critics.json").string() << "\n";
    return 0;
}

TrainConfig train_config(const Config& cfg) {
    TrainConfig t;
    t.steps = std::size_t(cfg.get_int_or("train.steps", 2000));
    t.eval_interval = std::size_t(cfg.get_int_or("train.eval_interval", 200));
    t.eval_episodes = std::size_t(cfg.get_int_or("train.eval_episodes", 5));
    t.eval_horizon = std::size_t(cfg.get_int_or("data.horizon", 200));
    t.update_critics = cfg.get_bool_or("train.update_critics", true);
    t.band.h_plus0 = cfg.get_double_or("train.h_plus", 0.2);
    t.band.h_minus0 = cfg.get_double_or("train.h_minus", 0.2);
    t.band.decay = cfg.get_bool_or("train.slack_decay", true);
    t.beta.kind = BetaSchedule::kind_from_name(
        cfg.get_string_or("train.beta_schedule", "linear"));
    t.beta.start = cfg.get_double_or("train.beta_start", 0.04);
    t.beta.end = cfg.get_double_or("train.beta_end", 1.0);
    t.adapt.cost_limit = cfg.get_double_or("train.cost_limit", 10.0);
    t.adapt.horizon = cfg.get_double_or("data.horizon", 200.0);
    t.adapt.cost_batch = std::size_t(cfg.get_int_or("train.cost_batch", 256));
    t.adapt.policy_batch = std::size_t(cfg.get_int_or("train.policy_batch", 32));
    t.adapt.n_mc = std::size_t(cfg.get_int_or("train.n_mc", 4));
    t.policy_adam.lr = cfg.get_double_or("train.lr", 6e-4);
    return t;
}

int cmd_train(const Context& ctx) {
    const fs::path data_path = ctx.artifact("dataset.csv");
    const fs::path denoiser_path = ctx.artifact("denoiser.json");
    const fs::path critics_path = ctx.artifact("critics.json");
    require_file(data_path, "dataset (run gen-data first)");
    require_file(denoiser_path, "diffusion checkpoint (run pretrain-diffusion first)");
    require_file(critics_path, "critic checkpoint (run pretrain-critics first)");

    const auto env = make_env(ctx.cfg);
    const auto dataset = TransitionDataset::load_csv(data_path.string());
    const auto denoiser = Denoiser::load(denoiser_path.string());
    const auto schedule = make_schedule(ctx.cfg);
    auto critics = CriticEnsemble::load(critics_path.string());

    Rng rng(ctx.seed + 3);
    GaussianPolicy policy(env->state_dim(), env->action_dim(),
                          hidden_widths(ctx.cfg, "policy"),
                          covariance_mode_from_name(
                              ctx.cfg.get_string_or("policy.covariance", "constant")),
                          rng, ctx.cfg.get_double_or("policy.init_sigma", 0.2));

    const auto result =
        train(*env, dataset, denoiser, schedule, critics, policy, train_config(ctx.cfg),
              ctx.seed + 4);
    policy.save(ctx.artifact("policy.json").string());
    save_metrics_csv(result.metrics, ctx.artifact("metrics.csv").string());
    save_region_csv(result.regions, ctx.artifact("regions.csv").string());
    std::cout << "wrote " << ctx.artifact("policy.json").string() << ", "
              << ctx.artifact("metrics.csv").string() << ", "
              << ctx.artifact("regions.csv").string() << "\n";
    return 0;
}

int cmd_eval(const Context& ctx, const std::string& policy_arg) {
    const fs::path data_path = ctx.artifact("dataset.csv");
    require_file(data_path, "dataset (run gen-data first)");
    const auto env = make_env(ctx.cfg);
    const auto dataset = TransitionDataset::load_csv(data_path.string());

    BehaviorPolicyFn policy_fn;
    GaussianPolicy policy;
    if (policy_arg == "behavior") {
        policy_fn = make_behavior(ctx.cfg, *env);
    } else {
        const fs::path path = policy_arg.empty() ? ctx.artifact("policy.json")
                                                 : fs::path(policy_arg);
        require_file(path, "policy checkpoint");
        policy = GaussianPolicy::load(path.string());
        policy_fn = [&policy](const Eigen::VectorXd& s, Rng&) { return policy.mean(s); };
    }

    const auto episodes = std::size_t(ctx.cfg.get_int_or("eval.episodes", 20));
    const auto horizon = std::size_t(ctx.cfg.get_int_or("data.horizon", 200));
    const double cost_limit = ctx.cfg.get_double_or("train.cost_limit", 10.0);
    Rng rng(ctx.seed + 5);
    double sum_r = 0.0, sum_r2 = 0.0, sum_c = 0.0, sum_c2 = 0.0;
    for (std::size_t i = 0; i < episodes; ++i) {
        const EpisodeStats s = evaluate_episode(*env, policy_fn, horizon, rng);
        sum_r += s.episodic_return;
        sum_r2 += s.episodic_return * s.episodic_return;
        sum_c += s.episodic_cost;
        sum_c2 += s.episodic_cost * s.episodic_cost;
    }
    const double n = double(episodes);
    const double mean_r = sum_r / n;
    const double mean_c = sum_c / n;
    const double se_r = std::sqrt(std::max(0.0, sum_r2 / n - mean_r * mean_r) / n);
    const double se_c = std::sqrt(std::max(0.0, sum_c2 / n - mean_c * mean_c) / n);
    const double norm_r = normalized_return(mean_r, dataset.min_episodic_return(),
                                            dataset.max_episodic_return());
    const double norm_c = normalized_cost(mean_c, 0.0, cost_limit);

    std::ofstream out(ctx.artifact("eval.csv"));
    out << "episodes,mean_return,se_return,mean_cost,se_cost,normalized_return,"
           "normalized_cost\n"
        << std::setprecision(17) << episodes << ',' << mean_r << ',' << se_r << ','
        << mean_c << ',' << se_c << ',' << norm_r << ',' << norm_c << '\n';
    std::cout << std::setprecision(6) << "episodes " << episodes << "\nmean_return "
              << mean_r << " (se " << se_r << ")\nmean_cost " << mean_c << " (se " << se_c
              << ")\nnormalized_return " << norm_r << "\nnormalized_cost " << norm_c
              << "\n";
    return 0;
}

int cmd_theorem(const Context& ctx) {
    TabularCMDP cmdp;
    if (ctx.cfg.has("env.file")) {
        cmdp = load_cmdp(ctx.cfg.get_string("env.file"));
    } else {
        cmdp = four_state_cmdp();
    }
    HarnessConfig hcfg;
    hcfg.eta = ctx.cfg.get_double_or("theorem.eta", hcfg.eta);
    hcfg.band.h_plus0 = ctx.cfg.get_double_or("theorem.h_plus", 0.05);
    hcfg.band.h_minus0 = ctx.cfg.get_double_or("theorem.h_minus", 0.05);
    hcfg.band.decay = false;
    hcfg.auto_slack = ctx.cfg.get_bool_or("theorem.auto_slack", false);
    hcfg.eps_dist = ctx.cfg.get_double_or("theorem.eps_dist", 0.0);

    std::vector<std::size_t> horizons;
    {
        std::istringstream in(ctx.cfg.get_string_or("theorem.horizons", "50,200,800"));
        std::string tok;
        while (std::getline(in, tok, ',')) horizons.push_back(std::stoul(tok));
    }
    std::vector<HarnessReport> reports;
    std::cout << std::setprecision(6) << "T\tgap\tviolation\tdegenerate\n";
    for (std::size_t T : horizons) {
        reports.push_back(tabular_theorem_harness(cmdp, T, hcfg));
        const auto& r = reports.back();
        std::cout << T << '\t' << r.gap << '\t' << r.violation << '\t'
                  << (r.degenerate ? "yes" : "no") << '\n';
    }
    save_harness_csv(reports, horizons, ctx.artifact("theorem.csv").string());
    std::cout << "wrote " << ctx.artifact("theorem.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diffusion-regularized constrained offline RL pipeline"};
    app.require_subcommand(1);

    std::string config_path, out_dir = "out", eval_policy;
    std::uint64_t cli_seed = 0;
    bool seed_given = false;
    app.add_option("--config", config_path, "Configuration file");
    app.add_option("--out", out_dir, "Output directory");
    auto* seed_opt = app.add_option("--seed", cli_seed, "Random seed override");

    auto* gen = app.add_subcommand("gen-data", "Roll out the behavior policy");
    auto* pdiff = app.add_subcommand("pretrain-diffusion", "Fit the behavioral denoiser");
    auto* pcrit = app.add_subcommand("pretrain-critics", "Fit reward and cost critics");
    auto* tr = app.add_subcommand("train", "Extract the policy with safe adaptation");
    auto* ev = app.add_subcommand("eval", "Evaluate a policy checkpoint");
    ev->add_option("--policy", eval_policy,
                   "Policy checkpoint path, or 'behavior' for the data-collection policy");
    auto* thm = app.add_subcommand("theorem", "Tabular convergence harness");

    CLI11_PARSE(app, argc, argv);
    seed_given = seed_opt->count() > 0;

    try {
        Context ctx;
        if (!config_path.empty()) ctx.cfg = Config::load(config_path);
        ctx.seed = resolve_seed(ctx.cfg, seed_given, cli_seed);
        ctx.out = ctx.cfg.get_string_or("run.out", out_dir);
        if (app.count("--out") > 0) ctx.out = out_dir;
        fs::create_directories(ctx.out);

        if (gen->parsed()) return cmd_gen_data(ctx);
        if (pdiff->parsed()) return cmd_pretrain_diffusion(ctx);
        if (pcrit->parsed()) return cmd_pretrain_critics(ctx);
        if (tr->parsed()) return cmd_train(ctx);
        if (ev->parsed()) return cmd_eval(ctx, eval_policy);
        if (thm->parsed()) return cmd_theorem(ctx);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
