#include "graphwalk/chat_client.hpp"

#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace graphwalk {

namespace {

using nlohmann::json;

struct ParsedEndpoint {
    std::string host_root;  // scheme://host[:port]
    std::string path;
};

ParsedEndpoint split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    std::size_t path_start =
        endpoint.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos) {
        return {endpoint, "/"};
    }
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class HttpChatTransport : public ChatTransport {
public:
    explicit HttpChatTransport(RemoteConfig config) : config_(std::move(config)) {
        if (config_.endpoint.empty()) throw RemoteError("remote endpoint is not configured");
    }

    std::string post(const std::string& body) override {
        ParsedEndpoint ep = split_endpoint(config_.endpoint);
        httplib::Client client(ep.host_root);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);

        httplib::Headers headers;
        if (!config_.auth_env.empty()) {
            const char* token = std::getenv(config_.auth_env.c_str());
            if (!token || !*token) {
                throw RemoteError("auth environment variable " + config_.auth_env +
                                  " is not set");
            }
            headers.emplace(config_.auth_header, "Bearer " + std::string(token));
        }

        auto res = client.Post(ep.path, headers, body, "application/json");
        if (!res) {
            throw RemoteError("transport failure contacting " + config_.endpoint + ": " +
                              httplib::to_string(res.error()));
        }
        if (res->status < 200 || res->status >= 300) {
            throw RemoteError("HTTP " + std::to_string(res->status) + " from " +
                              config_.endpoint);
        }
        return res->body;
    }

private:
    RemoteConfig config_;
};

}  // namespace

std::unique_ptr<ChatTransport> make_http_transport(const RemoteConfig& config) {
    return std::make_unique<HttpChatTransport>(config);
}

ChatClient::ChatClient(RemoteConfig config, std::unique_ptr<ChatTransport> transport)
    : config_(std::move(config)), transport_(std::move(transport)) {
    if (!transport_) transport_ = make_http_transport(config_);
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) {
    json request;
    request["model"] = config_.model;
    request["temperature"] = config_.temperature;
    request["messages"] = json::array();
    for (const auto& m : messages) {
        request["messages"].push_back({{"role", m.role}, {"content", m.content}});
    }
    const std::string body = request.dump();

    const int attempts = config_.max_retries + 1;
    std::string last_error;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        std::string response_body;
        try {
            response_body = transport_->post(body);
        } catch (const RemoteError& e) {
            last_error = e.what();
            continue;
        }
        json response = json::parse(response_body, nullptr, false);
        if (response.is_discarded()) {
            last_error = "response is not valid JSON";
            continue;
        }
        // Chat-completions shape; a bare {content: ...} is tolerated.
        if (response.contains("choices") && response["choices"].is_array() &&
            !response["choices"].empty()) {
            const json& choice = response["choices"][0];
            if (choice.contains("message") && choice["message"].contains("content") &&
                choice["message"]["content"].is_string()) {
                return choice["message"]["content"].get<std::string>();
            }
            if (choice.contains("text") && choice["text"].is_string()) {
                return choice["text"].get<std::string>();
            }
        }
        if (response.contains("content") && response["content"].is_string()) {
            return response["content"].get<std::string>();
        }
        last_error = "response carries no assistant text";
    }
    throw RemoteError("remote completion failed after " + std::to_string(attempts) +
                      " attempts: " + last_error);
}

}  // namespace graphwalk
