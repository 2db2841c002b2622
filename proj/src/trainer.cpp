#include "covq/trainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "covq/state_codec.hpp"

namespace covq {

namespace {

// Stacks per-transition observations into [B, 4, rows, cols] plus [B]
// budget scalars.
void gather_states(const std::vector<const StateTensor<Scalar>*>& states,
                   nn::Tensor<Scalar>& out_states, nn::Tensor<Scalar>& out_budgets) {
    const int b = static_cast<int>(states.size());
    const auto& shape = states[0]->channels.shape;
    out_states = nn::Tensor<Scalar>({b, shape[0], shape[1], shape[2]});
    out_budgets = nn::Tensor<Scalar>({b});
    const int64_t per = states[0]->channels.numel();
    for (int i = 0; i < b; ++i) {
        std::copy(states[i]->channels.data.begin(), states[i]->channels.data.end(),
                  out_states.data.begin() + static_cast<size_t>(i) * per);
        out_budgets[i] = states[i]->budget_scalar;
    }
}

}  // namespace

int TrainConfig::resolve_budget(const GridMap& map) const {
    const std::string& s = budget_spec;
    if (s.empty()) throw ConfigError("empty budget specification");
    if (s.back() == 'n' || s.back() == 'N') {
        const std::string mult = s.substr(0, s.size() - 1);
        try {
            const int k = std::stoi(mult);
            if (k <= 0 || std::to_string(k) != mult) throw std::invalid_argument(s);
            return k * map.side();
        } catch (const std::exception&) {
            throw ConfigError("bad budget '" + s + "'; expected e.g. 4n, 5n, 6n or an integer");
        }
    }
    try {
        const int b = std::stoi(s);
        if (b < 0 || std::to_string(b) != s) throw std::invalid_argument(s);
        return b;
    } catch (const std::exception&) {
        throw ConfigError("bad budget '" + s + "'; expected e.g. 4n, 5n, 6n or an integer");
    }
}

double epsilon_at(int episode, const TrainConfig& cfg) {
    return cfg.eps_end +
           (cfg.eps_start - cfg.eps_end) * std::exp(-static_cast<double>(episode) / cfg.eps_decay);
}

double beta_at(int episode, const TrainConfig& cfg) {
    const double span = std::max(1, cfg.episodes - 1);
    const double t = std::min(1.0, static_cast<double>(episode) / span);
    return cfg.per_beta_start + (cfg.per_beta_end - cfg.per_beta_start) * t;
}

std::vector<double> moving_average(const std::vector<double>& series, int window) {
    if (window < 1) throw Error("moving_average window must be >= 1");
    std::vector<double> out(series.size());
    double acc = 0.0;
    for (size_t i = 0; i < series.size(); ++i) {
        acc += series[i];
        if (i >= static_cast<size_t>(window)) acc -= series[i - window];
        const size_t n = std::min(i + 1, static_cast<size_t>(window));
        out[i] = acc / static_cast<double>(n);
    }
    return out;
}

PathReplay replay_path(const Env& env, const std::vector<Coord>& path) {
    if (path.empty()) throw Error("replay_path: empty path");
    if (!(path[0] == env.map().start())) {
        throw Error("replay_path: path does not begin at the start station");
    }
    EnvState s = env.reset();
    PathReplay out;
    for (size_t k = 1; k < path.size(); ++k) {
        const auto a = action_between(path[k - 1], path[k]);
        if (!a) throw Error("replay_path: cells " + std::to_string(k - 1) + " and " +
                            std::to_string(k) + " are not adjacent");
        auto [next, step_out] = env.step(s, *a);
        out.total_reward += step_out.reward;
        s = std::move(next);
    }
    out.steps = s.step;
    out.violations = s.violations;
    out.coverage_fraction = env.coverage_fraction(s);
    out.full_coverage = env.terminal_reason(s) == TerminalReason::FullCoverage;
    return out;
}

std::pair<int, nn::LstmState<Scalar>> select_action(QNetwork<Scalar>& net,
                                                    const StateTensor<Scalar>& state,
                                                    const nn::LstmState<Scalar>& hidden,
                                                    const std::array<bool, kNumActions>& mask,
                                                    double eps, Rng& rng) {
    auto [q, next_hidden] = net.forward(state, hidden);
    int action;
    if (rng.uniform() < eps) {
        std::array<int, kNumActions> allowed{};
        int n = 0;
        for (int a = 0; a < kNumActions; ++a) {
            if (mask[a]) allowed[n++] = a;
        }
        if (n == 0) throw AllMaskedError("select_action: no feasible action");
        action = allowed[rng.uniform_int(n)];
    } else {
        action = masked_argmax({q, mask});
    }
    return {action, std::move(next_hidden)};
}

std::vector<double> td_target(const std::vector<const Transition<Scalar>*>& batch,
                              QNetwork<Scalar>& policy, QNetwork<Scalar>& target, double gamma) {
    const int b = static_cast<int>(batch.size());
    std::vector<const StateTensor<Scalar>*> next_states(batch.size());
    for (int i = 0; i < b; ++i) next_states[i] = &batch[i]->next_state;

    nn::Tensor<Scalar> states, budgets;
    gather_states(next_states, states, budgets);
    nn::Tensor<Scalar> q_pol =
        policy.forward_batch(states, budgets, policy.zero_state(b), nn::BnMode::Eval, false);
    nn::Tensor<Scalar> q_tgt =
        target.forward_batch(states, budgets, target.zero_state(b), nn::BnMode::Eval, false);

    std::vector<double> y(batch.size());
    for (int i = 0; i < b; ++i) {
        if (batch[i]->done) {
            y[i] = batch[i]->reward;  // terminal: no bootstrap term
            continue;
        }
        MaskedQ mq;
        mq.mask = batch[i]->next_mask;
        for (int a = 0; a < kNumActions; ++a) mq.q[a] = q_pol.at(i, a);
        const int best = masked_argmax(mq);
        y[i] = batch[i]->reward + gamma * static_cast<double>(q_tgt.at(i, best));
    }
    return y;
}

Trainer::Trainer(Env env, TrainConfig cfg)
    : env_(std::move(env)),
      cfg_(cfg),
      rng_(cfg.seed),
      policy_(QNetworkConfig::for_map(env_.map().rows(), env_.map().cols(), cfg.variant,
                                      cfg.hidden),
              rng_),
      target_(policy_),
      buffer_(cfg.buffer_capacity, cfg.per_alpha, cfg.priority_floor) {
    if (cfg_.batch_size < 1 || cfg_.episodes < 0 || cfg_.target_sync < 1 ||
        cfg_.update_every < 1 || cfg_.buffer_capacity < 1) {
        throw ConfigError("train config values must be positive");
    }
    if (cfg_.gamma < 0.0 || cfg_.gamma > 1.0) throw ConfigError("gamma must lie in [0, 1]");
}

nn::LstmState<Scalar> Trainer::burn_in_hidden(QNetwork<Scalar>& net, int index, bool include_own) {
    nn::LstmState<Scalar> h = net.zero_state(1);
    if (cfg_.burn_in_len > 0 && net.variant() == Variant::Recurrent) {
        std::vector<int> history;
        int cur = index;
        for (int k = 0; k < cfg_.burn_in_len; ++k) {
            const auto prev = buffer_.prev_index(cur);
            if (!prev) break;
            if (buffer_.at(*prev).done) break;  // episode boundary
            history.push_back(*prev);
            cur = *prev;
        }
        for (auto it = history.rbegin(); it != history.rend(); ++it) {
            h = net.forward(buffer_.at(*it).state, h).second;
        }
    }
    if (include_own) h = net.forward(buffer_.at(index).state, h).second;
    return h;
}

std::optional<double> Trainer::train_step(double beta) {
    const int threshold = std::max(cfg_.batch_size, cfg_.warmup);
    if (buffer_.size() < threshold) return std::nullopt;

    const SampleBatch sample = buffer_.sample(cfg_.batch_size, beta, rng_);
    const int b = cfg_.batch_size;
    std::vector<const Transition<Scalar>*> batch(sample.indices.size());
    for (int i = 0; i < b; ++i) batch[i] = &buffer_.at(sample.indices[i]);

    const bool burn_in = cfg_.burn_in_len > 0 && cfg_.variant == Variant::Recurrent;

    // Regression targets.
    std::vector<double> y;
    nn::LstmState<Scalar> h0 = policy_.zero_state(b);
    if (!burn_in) {
        y = td_target(batch, policy_, target_, cfg_.gamma);
    } else {
        y.resize(batch.size());
        std::vector<const StateTensor<Scalar>*> next_states(batch.size());
        for (int i = 0; i < b; ++i) next_states[i] = &batch[i]->next_state;
        nn::Tensor<Scalar> states, budgets;
        gather_states(next_states, states, budgets);
        nn::LstmState<Scalar> hp_next = policy_.zero_state(b);
        nn::LstmState<Scalar> ht_next = target_.zero_state(b);
        for (int i = 0; i < b; ++i) {
            auto hp = burn_in_hidden(policy_, sample.indices[i], false);
            std::copy(hp.h.data.begin(), hp.h.data.end(), &h0.h.at(i, 0));
            std::copy(hp.c.data.begin(), hp.c.data.end(), &h0.c.at(i, 0));
            auto hpn = burn_in_hidden(policy_, sample.indices[i], true);
            std::copy(hpn.h.data.begin(), hpn.h.data.end(), &hp_next.h.at(i, 0));
            std::copy(hpn.c.data.begin(), hpn.c.data.end(), &hp_next.c.at(i, 0));
            auto htn = burn_in_hidden(target_, sample.indices[i], true);
            std::copy(htn.h.data.begin(), htn.h.data.end(), &ht_next.h.at(i, 0));
            std::copy(htn.c.data.begin(), htn.c.data.end(), &ht_next.c.at(i, 0));
        }
        nn::Tensor<Scalar> q_pol =
            policy_.forward_batch(states, budgets, hp_next, nn::BnMode::Eval, false);
        nn::Tensor<Scalar> q_tgt =
            target_.forward_batch(states, budgets, ht_next, nn::BnMode::Eval, false);
        for (int i = 0; i < b; ++i) {
            if (batch[i]->done) {
                y[i] = batch[i]->reward;
                continue;
            }
            MaskedQ mq;
            mq.mask = batch[i]->next_mask;
            for (int a = 0; a < kNumActions; ++a) mq.q[a] = q_pol.at(i, a);
            y[i] = batch[i]->reward + cfg_.gamma * static_cast<double>(q_tgt.at(i, masked_argmax(mq)));
        }
    }

    // Cached forward over the sampled states, training-mode batch norm.
    std::vector<const StateTensor<Scalar>*> cur_states(batch.size());
    for (int i = 0; i < b; ++i) cur_states[i] = &batch[i]->state;
    nn::Tensor<Scalar> states, budgets;
    gather_states(cur_states, states, budgets);
    nn::Tensor<Scalar> q_all =
        policy_.forward_batch(states, budgets, h0, nn::BnMode::Train, true);

    // Weighted MSE on the taken action's output only; other outputs get zero
    // gradient.
    std::vector<double> td(batch.size());
    double loss = 0.0;
    nn::Tensor<Scalar> dq({b, kNumActions});
    for (int i = 0; i < b; ++i) {
        const double pred = q_all.at(i, batch[i]->action);
        td[i] = pred - y[i];
        const double w = sample.weights[i];
        loss += w * td[i] * td[i];
        dq.at(i, batch[i]->action) = static_cast<Scalar>(2.0 * w * td[i] / b);
    }
    loss /= b;

    policy_.zero_grad();
    policy_.backward_batch(dq);
    nn::AdamConfig adam;
    adam.lr = cfg_.lr;
    policy_.adam_step(adam);

    std::vector<double> abs_td(td.size());
    for (size_t i = 0; i < td.size(); ++i) abs_td[i] = std::abs(td[i]);
    buffer_.update_priorities(sample.indices, abs_td);
    return loss;
}

void Trainer::sync_target() { target_.copy_from(policy_); }

TrainResult Trainer::run(const EpisodeCallback& on_episode, const SnapshotCallback& on_snapshot) {
    TrainResult result;
    result.log.reserve(static_cast<size_t>(cfg_.episodes));
    const GridMap& map = env_.map();
    const int budget = env_.budget_cap();

    for (int e = 0; e < cfg_.episodes; ++e) {
        const double eps = epsilon_at(e, cfg_);
        const double beta = beta_at(e, cfg_);

        EnvState s = env_.reset();
        nn::LstmState<Scalar> hidden = policy_.zero_state(1);
        std::vector<Coord> path{s.position};
        double total_reward = 0.0;

        if (env_.terminal_reason(s) == TerminalReason::None) {
            while (!s.done) {
                const auto mask = env_.action_mask(s);
                StateTensor<Scalar> obs = encode<Scalar>(map, s, budget);
                auto [action, next_hidden] = select_action(policy_, obs, hidden, mask, eps, rng_);
                hidden = std::move(next_hidden);
                auto [next, out] = env_.step(s, static_cast<Action>(action));
                total_reward += out.reward;

                Transition<Scalar> t;
                t.state = std::move(obs);
                t.action = action;
                t.reward = out.reward;
                t.next_state = encode<Scalar>(map, next, budget);
                t.next_mask = env_.action_mask(next);
                t.done = out.terminal;
                buffer_.push(std::move(t));

                path.push_back(next.position);
                s = std::move(next);
                ++global_step_;
                if (!cfg_.update_per_episode && global_step_ % cfg_.update_every == 0) {
                    train_step(beta);
                }
            }
        }
        if (cfg_.update_per_episode) train_step(beta);

        EpisodeRecord rec;
        rec.index = e;
        rec.steps = s.step;
        rec.coverage_pct = env_.coverage_fraction(s) * 100.0;
        rec.violations = s.violations;
        rec.total_reward = total_reward;
        rec.epsilon = eps;
        rec.is_best = env_.terminal_reason(s) == TerminalReason::FullCoverage && s.violations == 0;
        result.log.push_back(rec);
        if (rec.is_best) {
            result.best_episodes.push_back(BestSolution{path, total_reward, e});
            if (!result.best || total_reward > result.best->reward) {
                result.best = BestSolution{path, total_reward, e};
            }
        }
        if ((e + 1) % cfg_.target_sync == 0) {
            sync_target();
            ++result.target_sync_count;
        }
        if (on_episode) on_episode(rec);
        if (on_snapshot && cfg_.checkpoint_every > 0 && (e + 1) % cfg_.checkpoint_every == 0) {
            on_snapshot(e, policy_);
        }
    }
    return result;
}

EvalResult evaluate(QNetwork<Scalar>& net, const Env& env) {
    if (net.config().rows != env.map().rows() || net.config().cols != env.map().cols()) {
        throw ShapeMismatchError("network geometry does not match the map");
    }
    EnvState s = env.reset();
    nn::LstmState<Scalar> hidden = net.zero_state(1);
    EvalResult out;
    out.path.push_back(s.position);
    double total_reward = 0.0;

    while (!s.done && env.terminal_reason(s) == TerminalReason::None) {
        const auto mask = env.action_mask(s);
        const StateTensor<Scalar> obs = encode<Scalar>(env.map(), s, env.budget_cap());
        auto [q, next_hidden] = net.forward(obs, hidden);
        hidden = std::move(next_hidden);
        const int action = masked_argmax({q, mask});
        auto [next, step_out] = env.step(s, static_cast<Action>(action));
        total_reward += step_out.reward;
        out.path.push_back(next.position);
        s = std::move(next);
    }

    out.record.index = 0;
    out.record.steps = s.step;
    out.record.coverage_pct = env.coverage_fraction(s) * 100.0;
    out.record.violations = s.violations;
    out.record.total_reward = total_reward;
    out.record.epsilon = 0.0;
    out.record.is_best =
        env.terminal_reason(s) == TerminalReason::FullCoverage && s.violations == 0;
    return out;
}

}  // namespace covq
