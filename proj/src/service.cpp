#include "nutty/service.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <system_error>

#include "json.hpp"
#include "nutty/error.hpp"
#include "nutty/io.hpp"

namespace nutty {

using nlohmann::json;

namespace {

nmf::FilterParams session_default(double rate) {
    nmf::FilterParams p = *nmf::filter_preset("X3D");
    p.sample_rate = rate;
    return p;
}

}  // namespace

std::string error_message(std::string_view message) {
    return json{{"type", "error"}, {"message", std::string(message)}}.dump();
}

Session::Session(double rate) : filter_(session_default(rate), 0.0) {}

void Session::start_input(nmf::InputPreset input, std::uint64_t seed) {
    const auto& p = filter_.params();
    auto signal = nmf::make_input(input, p.p_min, p.p_max, seed);
    const double x0 = std::min(p.p_max, std::max(p.p_min, signal.front().value));
    filter_.reset(x0);
    input_ = std::move(signal);
    cursor_ = 0;
    set_point_ = input_.front().value;
    seq_ = 0;
}

double Session::current_set_point(double t) {
    if (input_.empty()) return set_point_;
    while (cursor_ + 1 < input_.size() && input_[cursor_ + 1].t <= t + 1e-9 * dt()) ++cursor_;
    set_point_ = input_[cursor_].value;
    return set_point_;
}

std::optional<std::string> Session::handle(std::string_view line) {
    json msg;
    try {
        msg = json::parse(line);
    } catch (const json::parse_error& e) {
        return error_message(std::string("malformed message: ") + e.what());
    }
    if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
        return error_message("message needs a string 'type'");
    const std::string type = msg["type"].get<std::string>();
    const json payload = msg.value("payload", json());

    try {
        if (type == "set_params") {
            if (!payload.is_object()) return error_message("set_params needs an object payload");
            nmf::FilterParams next = merge_filter_params(filter_.params(), payload.dump());
            if (payload.contains("preset") && !payload.contains("sample_rate")) next.sample_rate = filter_.params().sample_rate;
            filter_.set_params(next);
        } else if (type == "set_point") {
            json value = payload.is_object() ? payload.value("value", json()) : payload;
            if (!value.is_number() || !std::isfinite(value.get<double>()))
                return error_message("set_point needs a finite number");
            input_.clear();
            set_point_ = value.get<double>();
        } else if (type == "preset") {
            std::optional<std::string> filter_name, input_name;
            std::uint64_t seed = 0;
            if (payload.is_string()) {
                const auto name = payload.get<std::string>();
                (nmf::input_preset(name) ? input_name : filter_name) = name;
            } else if (payload.is_object()) {
                for (const auto& [key, _] : payload.items()) {
                    if (key != "filter" && key != "input" && key != "seed") return error_message("unknown preset key '" + key + "'");
                }
                if (payload.contains("filter")) filter_name = payload["filter"].get<std::string>();
                if (payload.contains("input")) input_name = payload["input"].get<std::string>();
                if (payload.contains("seed")) seed = payload["seed"].get<std::uint64_t>();
            } else {
                return error_message("preset needs a name or an object payload");
            }
            std::optional<nmf::FilterParams> params;
            if (filter_name) {
                params = nmf::filter_preset(*filter_name);
                if (!params) return error_message("unknown filter preset '" + *filter_name + "'");
                params->sample_rate = filter_.params().sample_rate;
            }
            std::optional<nmf::InputPreset> input;
            if (input_name) {
                input = nmf::input_preset(*input_name);
                if (!input) return error_message("unknown input preset '" + *input_name + "'");
            }
            if (params) filter_.set_params(*params);
            if (input) start_input(*input, seed);
        } else if (type == "reset") {
            double x0 = 0.0;
            if (payload.is_object() && payload.contains("x")) {
                if (!payload["x"].is_number()) return error_message("reset 'x' must be a number");
                x0 = payload["x"].get<double>();
            } else if (!payload.is_null() && !payload.is_object()) {
                return error_message("reset payload must be an object");
            }
            const auto& p = filter_.params();
            if (!(x0 >= p.p_min && x0 <= p.p_max)) return error_message("reset 'x' is outside the position range");
            filter_.reset(x0);
            input_.clear();
            set_point_ = x0;
            seq_ = 0;
        } else {
            return error_message("unknown message type '" + type + "'");
        }
    } catch (const json::exception& e) {
        return error_message(std::string("bad payload: ") + e.what());
    } catch (const std::runtime_error& e) {
        return error_message(e.what());
    }
    return std::nullopt;
}

std::string Session::tick() {
    ++seq_;
    const double t = static_cast<double>(seq_) * dt();
    const double s = current_set_point(t);
    const nmf::FilterOutput o = filter_.step(s);
    return json{{"type", "frame"}, {"seq", seq_}, {"t", t}, {"x", o.x}, {"v", o.v},
                {"a", o.a},        {"j", o.j},    {"s", s}}
        .dump();
}

SessionServer::SessionServer(std::string host, std::uint16_t port, double rate)
    : host_(std::move(host)), port_(port), rate_(rate) {
    if (!(rate > 0.0) || !std::isfinite(rate)) throw ValidationError("rate must be positive");
}

SessionServer::~SessionServer() { stop(); }

std::uint16_t SessionServer::start() {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = AI_PASSIVE;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port_);
    if (const int rc = ::getaddrinfo(host_.empty() ? nullptr : host_.c_str(), service.c_str(), &hints, &found); rc != 0)
        throw std::system_error(EADDRNOTAVAIL, std::generic_category(), "cannot resolve '" + host_ + "'");

    const int fd = ::socket(found->ai_family, found->ai_socktype, found->ai_protocol);
    if (fd < 0) {
        ::freeaddrinfo(found);
        throw std::system_error(errno, std::generic_category(), "socket");
    }
    const int yes = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    if (::bind(fd, found->ai_addr, found->ai_addrlen) != 0 || ::listen(fd, 16) != 0) {
        const int err = errno;
        ::freeaddrinfo(found);
        ::close(fd);
        throw std::system_error(err, std::generic_category(), "cannot listen on port " + service);
    }
    ::freeaddrinfo(found);

    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
    listener_ = fd;
    running_ = true;
    acceptor_ = std::thread([this] { accept_loop(); });
    return port_;
}

void SessionServer::accept_loop() {
    while (running_) {
        pollfd p{listener_, POLLIN, 0};
        if (::poll(&p, 1, 100) <= 0) continue;
        const int client = ::accept(listener_, nullptr, nullptr);
        if (client < 0) continue;
        std::lock_guard lock(mutex_);
        if (!running_) {
            ::close(client);
            break;
        }
        clients_.push_back(client);
        workers_.emplace_back([this, client] { serve(client); });
    }
}

void SessionServer::serve(int fd) {
    using clock = std::chrono::steady_clock;
    Session session(rate_);
    std::string inbound;
    auto next = clock::now();
    const auto send_all = [fd](const std::string& line) {
        std::string data = line + "\n";
        std::size_t sent = 0;
        while (sent < data.size()) {
            const auto n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n <= 0) return false;
            sent += static_cast<std::size_t>(n);
        }
        return true;
    };

    while (running_) {
        // Read whatever arrives until the next tick is due.
        bool open = true;
        while (open) {
            const auto wait = std::chrono::duration_cast<std::chrono::milliseconds>(next - clock::now()).count();
            pollfd p{fd, POLLIN, 0};
            const int ready = ::poll(&p, 1, static_cast<int>(std::max<long long>(0, wait)));
            if (ready <= 0) break;
            char buf[4096];
            const auto n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0) {
                open = false;
                break;
            }
            inbound.append(buf, static_cast<std::size_t>(n));
        }
        if (!open || !running_) break;

        std::size_t nl;
        while ((nl = inbound.find('\n')) != std::string::npos) {
            const std::string line = inbound.substr(0, nl);
            inbound.erase(0, nl + 1);
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            if (const auto error = session.handle(line); error && !send_all(*error)) open = false;
        }
        if (!open || !send_all(session.tick())) break;
        next += std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(session.dt()));
        if (next < clock::now() - std::chrono::seconds(1)) next = clock::now();
    }
    std::lock_guard lock(mutex_);
    for (auto& c : clients_) {
        if (c == fd) {
            ::close(fd);
            c = -1;
        }
    }
}

void SessionServer::stop() {
    if (!running_.exchange(false)) return;
    if (acceptor_.joinable()) acceptor_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard lock(mutex_);
        for (int c : clients_) {
            if (c >= 0) ::shutdown(c, SHUT_RDWR);
        }
        workers.swap(workers_);
    }
    for (auto& w : workers) w.join();
    clients_.clear();
    if (listener_ >= 0) ::close(listener_);
    listener_ = -1;
}

void SessionServer::wait() {
    while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

}  // namespace nutty
