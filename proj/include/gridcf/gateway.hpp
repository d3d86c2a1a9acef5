#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "gridcf/caseio.hpp"
#include "gridcf/cfx.hpp"
#include "gridcf/learn.hpp"

namespace httplib {
class Server;
}

namespace gridcf {

struct HttpResponse {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

struct LogEntry {
    std::string method;
    std::string path;
    std::string request;
    std::optional<std::uint64_t> seed;
    int status = 0;
    std::string digest;  // FNV-1a of the response body, hex
};

// Bounded in-memory log; the oldest entries drop off once full. flush()
// appends entries not yet written to a JSONL file.
class RequestLog {
public:
    explicit RequestLog(std::size_t capacity = 1024) : capacity_(capacity) {}

    void append(LogEntry e);
    std::vector<LogEntry> entries() const;
    std::size_t pending() const;
    std::size_t flush(const std::string& path);

private:
    mutable std::mutex mu_;
    std::size_t capacity_;
    std::deque<LogEntry> entries_;
    std::size_t unflushed_ = 0;
};

std::string fnv1a_hex(const std::string& s);

struct GatewayOptions {
    CfConfig cf;  // defaults for fields a request leaves out
    std::size_t max_retries = 3;
    std::string static_dir;  // console bundle served at "/" when set
    std::string log_path;    // JSONL request log when set
    std::size_t flush_every = 32;
};

class Gateway {
public:
    Gateway(NetworkCase c, std::map<std::string, StoredModel> models, GatewayOptions options = {});
    ~Gateway();

    // Every *.json model in dir, keyed by file stem.
    static std::map<std::string, StoredModel> load_models(const std::string& dir);

    HttpResponse handle(const std::string& method, const std::string& path, const std::string& body);

    const RequestLog& log() const { return log_; }
    const NetworkCase& network() const { return case_; }

    // Blocks until stop() is called.
    bool serve(const std::string& host, int port);
    void stop();
    int bound_port() const { return bound_port_; }

private:
    HttpResponse route(const std::string& method, const std::string& path, const std::string& body,
                       std::optional<std::uint64_t>& seed);

    const NetworkCase case_;
    const std::map<std::string, StoredModel> models_;
    const GatewayOptions options_;
    RequestLog log_;
    std::unique_ptr<httplib::Server> server_;
    std::atomic<int> bound_port_{0};
};

}  // namespace gridcf
