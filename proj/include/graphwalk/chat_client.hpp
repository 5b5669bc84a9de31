#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace graphwalk {

class RemoteError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ChatMessage {
    std::string role;
    std::string content;
};

struct RemoteConfig {
    std::string endpoint;            // e.g. "http://127.0.0.1:8000/v1/chat/completions"
    std::string model;
    double temperature = 0.0;
    int max_retries = 2;             // extra attempts after the first
    std::string auth_env;            // env var holding the bearer token, optional
    std::string auth_header = "Authorization";
    int timeout_seconds = 120;
};

/// Transport seam: posts a JSON request body, returns the raw response body.
/// Throws RemoteError on transport failure.
class ChatTransport {
public:
    virtual ~ChatTransport() = default;
    virtual std::string post(const std::string& body) = 0;
};

/// POSTs to the configured endpoint over HTTP.
std::unique_ptr<ChatTransport> make_http_transport(const RemoteConfig& config);

/// Chat-completions-shaped client: {model, temperature, messages:[...]} in,
/// choices[0].message.content out. Transport errors are retried up to
/// config.max_retries before giving up.
class ChatClient {
public:
    explicit ChatClient(RemoteConfig config, std::unique_ptr<ChatTransport> transport = nullptr);

    /// Returns the assistant text. Throws RemoteError after retries are
    /// exhausted or when the response carries no assistant text.
    std::string complete(const std::vector<ChatMessage>& messages);

    const RemoteConfig& config() const { return config_; }

private:
    RemoteConfig config_;
    std::unique_ptr<ChatTransport> transport_;
};

}  // namespace graphwalk
