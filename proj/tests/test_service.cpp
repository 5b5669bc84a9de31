#include <doctest.h>

#include <atomic>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "graphwalk/service.hpp"
#include "graphwalk/synthesis.hpp"
#include "helpers.hpp"

using namespace graphwalk;
using namespace graphwalk::testing;
using nlohmann::json;

namespace {

KnowledgeGraph three_triple_fixture() {
    std::istringstream in(
        "Inception|directed_by|Christopher Nolan\n"
        "Inception|starred_actors|Leonardo DiCaprio\n"
        "Interstellar|directed_by|Christopher Nolan\n");
    return KnowledgeGraph::load(in, KbFormat::metaqa_pipe);
}

json post_json(httplib::Client& client, const std::string& path, const json& body,
               int* status = nullptr) {
    auto res = client.Post(path, body.dump(), "application/json");
    REQUIRE(res);
    if (status) *status = res->status;
    return json::parse(res->body);
}

json create_episode(httplib::Client& client, const std::string& question,
                    const std::vector<std::string>& topics) {
    return post_json(client, "/episodes",
                     json{{"question", question}, {"topic_entities", topics}});
}

json step(httplib::Client& client, const std::string& id, const std::string& action,
          int* status = nullptr) {
    return post_json(client, "/episodes/" + id + "/step", json{{"action", action}}, status);
}

}  // namespace

TEST_SUITE("service") {

TEST_CASE("episode lifecycle over HTTP") {
    KnowledgeGraph g = three_triple_fixture();
    EpisodeService service(g, ServiceConfig{});
    int port = service.start_background();
    httplib::Client client("127.0.0.1", port);

    json created = create_episode(client, "who directed Inception", {"Inception"});
    REQUIRE(created.contains("episode_id"));
    const std::string id = created["episode_id"];
    CHECK(created["status"] == "running");
    CHECK(created["observation"]["window_size"] == 0);

    SUBCASE("explore lists both incident triples") {
        json reply = step(client, id, "EXPLORE[\"Inception\"]");
        CHECK(reply["status"] == "running");
        CHECK(reply["observation"]["window_size"] == 2);
        CHECK(reply["observation"]["text"].get<std::string>().find(
                  "(Inception | directed_by | Christopher Nolan)") != std::string::npos);
    }
    SUBCASE("out-of-range choose is a structured parse error and changes nothing") {
        step(client, id, "EXPLORE[\"Inception\"]");
        int status = 0;
        json reply = step(client, id, "CHOOSE[9]", &status);
        CHECK(status == 400);
        CHECK(reply["code"] == "parse-error");
        CHECK(reply["message"].get<std::string>().find("index 9") != std::string::npos);

        auto res = client.Get("/episodes/" + id);
        REQUIRE(res);
        json got = json::parse(res->body);
        CHECK(got["step"] == 1);
        CHECK(got["subgraph_size"] == 0);
    }
    SUBCASE("rejected actions come back as structured rejections") {
        int status = 0;
        json reply = step(client, id, "EXPLORE[\"Nowhere Land\"]", &status);
        CHECK(status == 200);
        CHECK(reply["status"] == "rejected");
        CHECK(reply["code"] == "action-rejected");
        auto res = client.Get("/episodes/" + id);
        CHECK(json::parse(res->body)["step"] == 0);
    }
    SUBCASE("stepping a finished episode is a conflict") {
        step(client, id, "FINISH");
        int status = 0;
        json reply = step(client, id, "EXPLORE[\"Inception\"]", &status);
        CHECK(status == 409);
        CHECK(reply["code"] == "conflict");

        // GET and DELETE still work on terminal episodes.
        auto res = client.Get("/episodes/" + id);
        REQUIRE(res);
        CHECK(json::parse(res->body)["status"] == "finished");
        auto del = client.Delete("/episodes/" + id);
        REQUIRE(del);
        CHECK(json::parse(del->body)["deleted"] == true);
        auto gone = client.Get("/episodes/" + id);
        CHECK(gone->status == 404);
    }
    service.stop();
}

TEST_CASE("unknown ids and malformed bodies") {
    KnowledgeGraph g = three_triple_fixture();
    EpisodeService service(g, ServiceConfig{});
    int port = service.start_background();
    httplib::Client client("127.0.0.1", port);

    int status = 0;
    json reply = step(client, "ep-404", "FINISH", &status);
    CHECK(status == 404);
    CHECK(reply["code"] == "not-found");

    auto res = client.Post("/episodes", "not json", "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["code"] == "bad-request");

    res = client.Post("/episodes",
                      json{{"question", "q"}, {"topic_entities", json::array({"Nope"})}}
                          .dump(),
                      "application/json");
    CHECK(res->status == 400);
    CHECK(json::parse(res->body)["message"].get<std::string>().find("Nope") !=
          std::string::npos);

    res = client.Delete("/episodes/ep-404");
    CHECK(res->status == 404);
    service.stop();
}

TEST_CASE("per-episode config override caps the budget") {
    KnowledgeGraph g = three_triple_fixture();
    EpisodeService service(g, ServiceConfig{});
    int port = service.start_background();
    httplib::Client client("127.0.0.1", port);

    json created = post_json(client, "/episodes",
                             json{{"question", "q"},
                                  {"topic_entities", json::array({"Inception"})},
                                  {"config", {{"max_steps", 1}}}});
    const std::string id = created["episode_id"];
    json reply = step(client, id, "EXPLORE[\"Inception\"]");
    CHECK(reply["status"] == "truncated");
    service.stop();
}

TEST_CASE("per-step rewards appear when references are loaded") {
    KnowledgeGraph g = load_fixture("movies_kb.pipe");
    // Build a refined reference for m1 directly.
    QAInstance qa;
    qa.id = "m1";
    qa.question = "who directed Inception";
    qa.topic_entities = {"Inception"};
    qa.gold_answers = {"Christopher Nolan"};
    ScriptedPolicy oracle({Action::explore(*g.resolve_entity("Inception")),
                           Action::choose({find_triple(g, "Inception", "directed_by",
                                                       "Christopher Nolan")}),
                           Action::finish()});
    SynthesisConfig config;
    Trajectory reference = refine_trajectory(g, run_episode(g, qa, oracle, config));

    EpisodeService service(g, ServiceConfig{});
    service.load_references({reference});
    int port = service.start_background();
    httplib::Client client("127.0.0.1", port);

    json created = post_json(client, "/episodes",
                             json{{"question", qa.question},
                                  {"topic_entities", json::array({"Inception"})},
                                  {"id", "m1"}});
    const std::string id = created["episode_id"];

    json r1 = step(client, id, "EXPLORE[\"Inception\"]");
    REQUIRE(r1.contains("reward"));
    CHECK(r1["reward"]["process_reward"] == 1.0);
    CHECK(r1["reward"]["reference_action"] == "EXPLORE[\"Inception\"]");

    json r2 = step(client, id, "EXPLORE[\"Interstellar\"]");
    REQUIRE(r2.contains("reward"));
    CHECK(r2["reward"]["process_reward"] == 0.0);  // reference says choose here
    service.stop();
}

TEST_CASE("two concurrent steps on one episode serialize cleanly") {
    KnowledgeGraph g = three_triple_fixture();
    EpisodeService service(g, ServiceConfig{});
    int port = service.start_background();
    httplib::Client setup("127.0.0.1", port);
    const std::string id =
        create_episode(setup, "who directed Inception", {"Inception"})["episode_id"];

    // Two racing FINISH steps: exactly one is accepted, the other sees a
    // conflict (or both apply in sequence when the race resolves early --
    // never a corrupted state).
    std::atomic<int> finished{0}, conflict{0};
    std::vector<std::thread> workers;
    for (int i = 0; i < 2; ++i) {
        workers.emplace_back([&] {
            httplib::Client client("127.0.0.1", port);
            int status = 0;
            json reply = step(client, id, "FINISH", &status);
            if (status == 200 && reply["status"] == "finished") ++finished;
            if (status == 409) ++conflict;
        });
    }
    for (auto& w : workers) w.join();
    CHECK(finished == 1);
    CHECK(conflict == 1);

    auto res = setup.Get("/episodes/" + id);
    json got = json::parse(res->body);
    CHECK(got["status"] == "finished");
    CHECK(got["step"] == 1);
    service.stop();
}

TEST_CASE("distinct episodes progress independently under concurrent stepping") {
    KnowledgeGraph g = three_triple_fixture();
    EpisodeService service(g, ServiceConfig{});
    int port = service.start_background();

    constexpr int kEpisodes = 8;
    std::vector<std::string> ids(kEpisodes);
    {
        httplib::Client client("127.0.0.1", port);
        for (int i = 0; i < kEpisodes; ++i) {
            ids[i] = create_episode(client, "who directed Inception", {"Inception"})
                         ["episode_id"];
        }
    }

    std::vector<std::thread> workers;
    for (int i = 0; i < kEpisodes; ++i) {
        workers.emplace_back([&, i] {
            httplib::Client client("127.0.0.1", port);
            step(client, ids[i], "EXPLORE[\"Inception\"]");
            step(client, ids[i], "CHOOSE[1]");
            step(client, ids[i], "FINISH");
        });
    }
    for (auto& w : workers) w.join();

    httplib::Client client("127.0.0.1", port);
    for (int i = 0; i < kEpisodes; ++i) {
        auto res = client.Get("/episodes/" + ids[i]);
        json got = json::parse(res->body);
        CHECK(got["status"] == "finished");
        CHECK(got["step"] == 3);
        CHECK(got["subgraph_size"] == 1);
    }
    service.stop();
}

}  // TEST_SUITE
