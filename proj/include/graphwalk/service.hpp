#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <vector>

#include "graphwalk/env.hpp"
#include "graphwalk/kg.hpp"
#include "graphwalk/synthesis.hpp"

namespace graphwalk {

struct ServiceConfig {
    int port = 8080;
    std::string host = "0.0.0.0";
    EpisodeConfig episode;
    std::chrono::seconds idle_timeout{30 * 60};
};

/// HTTP episode API over a shared read-only graph:
///   POST   /episodes            {question, topic_entities, id?, config?}
///   POST   /episodes/{id}/step  {action: "<grammar string>"}
///   GET    /episodes/{id}
///   DELETE /episodes/{id}
/// Episode state lives in memory and is evicted after idle_timeout.
/// Per-episode stepping is serialized; distinct episodes run in parallel.
class EpisodeService {
public:
    EpisodeService(const KnowledgeGraph& g, ServiceConfig config);
    ~EpisodeService();

    EpisodeService(const EpisodeService&) = delete;
    EpisodeService& operator=(const EpisodeService&) = delete;

    /// Attach refined reference trajectories (keyed by qa id): steps of
    /// episodes created with a matching id report per-step process rewards.
    void load_references(const std::vector<Trajectory>& refined);

    /// Blocking serve on config.port. Returns false when binding fails.
    bool run();

    /// Background serve on an OS-assigned port (tests). Returns the port.
    int start_background();
    void stop();
    int port() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace graphwalk
