#include "graphwalk/service.hpp"

#include <atomic>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "graphwalk/policy.hpp"
#include "graphwalk/reward.hpp"

namespace graphwalk {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

json observation_json(const Observation& obs) {
    return json{{"text", obs.text},
                {"window_size", obs.window_size},
                {"subgraph_size", obs.subgraph_size},
                {"step", obs.step},
                {"budget_remaining", obs.budget_remaining},
                {"truncated_render", obs.truncated_render}};
}

void send_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message) {
    send_json(res, status, json{{"code", code}, {"message", message}});
}

}  // namespace

struct EpisodeService::Impl {
    struct Session {
        std::mutex mutex;
        EpisodeState state;
        std::vector<Action> reference_actions;
        std::vector<std::string> reference_serialized;
        // Read by the eviction sweep without the session mutex.
        std::atomic<Clock::rep> last_touch{Clock::now().time_since_epoch().count()};

        void touch() { last_touch = Clock::now().time_since_epoch().count(); }
        Clock::duration idle_for(Clock::time_point now) const {
            return now - Clock::time_point(Clock::duration(last_touch.load()));
        }
    };

    const KnowledgeGraph& graph;
    ServiceConfig config;
    httplib::Server server;
    std::thread thread;
    std::atomic<std::uint64_t> next_id{1};
    int bound_port = 0;

    std::mutex sessions_mutex;
    std::unordered_map<std::string, std::shared_ptr<Session>> sessions;

    std::mutex refs_mutex;
    std::unordered_map<std::string, std::pair<std::vector<Action>, std::vector<std::string>>>
        references;  // qa id -> (materialized actions, serialized forms)

    Impl(const KnowledgeGraph& g, ServiceConfig cfg) : graph(g), config(std::move(cfg)) {
        register_routes();
    }

    std::shared_ptr<Session> find(const std::string& id) {
        std::lock_guard<std::mutex> lock(sessions_mutex);
        auto it = sessions.find(id);
        return it == sessions.end() ? nullptr : it->second;
    }

    void evict_idle() {
        const auto now = Clock::now();
        std::lock_guard<std::mutex> lock(sessions_mutex);
        for (auto it = sessions.begin(); it != sessions.end();) {
            if (it->second->idle_for(now) > config.idle_timeout) {
                it = sessions.erase(it);
            } else {
                ++it;
            }
        }
    }

    void register_routes() {
        server.Post("/episodes", [this](const httplib::Request& req, httplib::Response& res) {
            evict_idle();
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object()) {
                return send_error(res, 400, "bad-request", "body is not a JSON object");
            }
            Query q;
            try {
                q.text = body.at("question").get<std::string>();
                q.topic_entities = body.at("topic_entities").get<std::vector<std::string>>();
            } catch (const json::exception& e) {
                return send_error(res, 400, "bad-request", e.what());
            }
            if (body.contains("id") && body["id"].is_string()) {
                q.id = body["id"].get<std::string>();
            }

            EpisodeConfig episode_config = config.episode;
            if (body.contains("config") && body["config"].is_object()) {
                const json& c = body["config"];
                if (c.contains("max_steps")) {
                    episode_config.max_steps = c["max_steps"].get<std::size_t>();
                }
                if (c.contains("max_consecutive_rejections")) {
                    episode_config.max_consecutive_rejections =
                        c["max_consecutive_rejections"].get<std::size_t>();
                }
                if (c.contains("max_window_lines")) {
                    episode_config.max_window_lines = c["max_window_lines"].get<std::size_t>();
                }
            }

            auto session = std::make_shared<Session>();
            try {
                session->state = init_episode(graph, q, episode_config);
            } catch (const EpisodeError& e) {
                return send_error(res, 400, "bad-request", e.what());
            }
            if (!q.id.empty()) {
                std::lock_guard<std::mutex> lock(refs_mutex);
                auto it = references.find(q.id);
                if (it != references.end()) {
                    session->reference_actions = it->second.first;
                    session->reference_serialized = it->second.second;
                }
            }

            std::string episode_id = "ep-" + std::to_string(next_id.fetch_add(1));
            {
                std::lock_guard<std::mutex> lock(sessions_mutex);
                sessions.emplace(episode_id, session);
            }
            Observation obs = render_observation(
                graph, session->state, RenderLimits{episode_config.max_window_lines});
            send_json(res, 200,
                      json{{"episode_id", episode_id},
                           {"status", to_string(session->state.status)},
                           {"observation", observation_json(obs)}});
        });

        server.Post(R"(/episodes/([^/]+)/step)",
                    [this](const httplib::Request& req, httplib::Response& res) {
            auto session = find(req.matches[1]);
            if (!session) {
                return send_error(res, 404, "not-found",
                                  "unknown episode id " + std::string(req.matches[1]));
            }
            json body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object() || !body.contains("action") ||
                !body["action"].is_string()) {
                return send_error(res, 400, "bad-request",
                                  "body must be {\"action\": \"<string>\"}");
            }
            const std::string action_text = body["action"].get<std::string>();

            std::lock_guard<std::mutex> lock(session->mutex);
            session->touch();
            if (!session->state.running()) {
                return send_error(res, 409, "conflict",
                                  "episode is " + to_string(session->state.status));
            }

            Action action;
            try {
                action = parse_action(action_text, session->state.window, graph);
            } catch (const ActionParseError& e) {
                return send_error(res, 400, "parse-error", e.what());
            }

            const std::size_t step_index = session->state.step;
            StepResult result = apply_action(graph, session->state, action);
            session->state = result.state;

            if (!result.accepted) {
                send_json(res, 200,
                          json{{"status", "rejected"},
                               {"code", "action-rejected"},
                               {"reason", result.rejection},
                               {"episode_status", to_string(session->state.status)},
                               {"observation", observation_json(result.observation)}});
                return;
            }

            json reply{{"status", to_string(session->state.status)},
                       {"observation", observation_json(result.observation)}};
            if (step_index < session->reference_actions.size()) {
                reply["reward"] =
                    json{{"process_reward",
                          process_reward(action, session->reference_actions[step_index])},
                         {"reference_action", session->reference_serialized[step_index]}};
            }
            send_json(res, 200, reply);
        });

        server.Get(R"(/episodes/([^/]+))",
                   [this](const httplib::Request& req, httplib::Response& res) {
            auto session = find(req.matches[1]);
            if (!session) {
                return send_error(res, 404, "not-found",
                                  "unknown episode id " + std::string(req.matches[1]));
            }
            std::lock_guard<std::mutex> lock(session->mutex);
            session->touch();
            const EpisodeState& s = session->state;
            Observation obs =
                render_observation(graph, s, RenderLimits{s.config.max_window_lines});
            json subgraph = json::array();
            for (const Triple& t : s.subgraph) subgraph.push_back(graph.render_triple(t));
            send_json(res, 200,
                      json{{"episode_id", std::string(req.matches[1])},
                           {"status", to_string(s.status)},
                           {"step", s.step},
                           {"question", s.query.text},
                           {"window_size", s.window.size()},
                           {"subgraph_size", s.subgraph.size()},
                           {"subgraph", subgraph},
                           {"triples_retrieved", s.ever_windowed.size()},
                           {"observation", observation_json(obs)}});
        });

        server.Delete(R"(/episodes/([^/]+))",
                      [this](const httplib::Request& req, httplib::Response& res) {
            std::lock_guard<std::mutex> lock(sessions_mutex);
            auto it = sessions.find(req.matches[1]);
            if (it == sessions.end()) {
                return send_error(res, 404, "not-found",
                                  "unknown episode id " + std::string(req.matches[1]));
            }
            sessions.erase(it);
            send_json(res, 200, json{{"deleted", true}});
        });
    }
};

EpisodeService::EpisodeService(const KnowledgeGraph& g, ServiceConfig config)
    : impl_(std::make_unique<Impl>(g, std::move(config))) {}

EpisodeService::~EpisodeService() {
    stop();
}

void EpisodeService::load_references(const std::vector<Trajectory>& refined) {
    std::lock_guard<std::mutex> lock(impl_->refs_mutex);
    for (const Trajectory& t : refined) {
        EpisodeState replayed = replay_trajectory(impl_->graph, t);
        std::vector<Action> actions;
        std::vector<std::string> serialized;
        for (std::size_t i = 0; i < replayed.history.size(); ++i) {
            actions.push_back(replayed.history[i].action);
            serialized.push_back(i < t.steps.size() ? t.steps[i].action : "");
        }
        impl_->references[t.qa.id] = {std::move(actions), std::move(serialized)};
    }
}

bool EpisodeService::run() {
    impl_->bound_port = impl_->config.port;
    return impl_->server.listen(impl_->config.host, impl_->config.port);
}

int EpisodeService::start_background() {
    impl_->bound_port = impl_->server.bind_to_any_port("127.0.0.1");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->bound_port;
}

void EpisodeService::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int EpisodeService::port() const {
    return impl_->bound_port;
}

}  // namespace graphwalk
