#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "nutty/nmf.hpp"

namespace nutty {

/// One live filter session of the serve protocol. Inbound messages are
/// newline-free JSON objects {"type", "payload"}:
///   set_params  payload: filter-params object (partial; x/v/a preserved)
///   set_point   payload: number or {"value": number}; stops any input preset
///   preset      payload: a filter preset name, an input name
///               (phi_l|phi_r|phi_c), or {"filter"?, "input"?, "seed"?}
///   reset       payload: optional {"x": number}; rest at x (default 0)
/// Choosing an input restarts the clock with the filter at rest on the
/// input's first value. Outbound frames are
/// {"type":"frame","seq","t","x","v","a","j","s"} with t = seq·dt.
class Session {
public:
    explicit Session(double rate = 60.0);

    /// Applies one inbound line. Returns an error message line when the
    /// message is rejected; the session state is then unchanged.
    std::optional<std::string> handle(std::string_view line);

    /// Advances one tick and returns the frame message line.
    std::string tick();

    double dt() const { return filter_.params().dt(); }
    const nmf::FilterParams& params() const { return filter_.params(); }
    const nmf::FilterState& state() const { return filter_.state(); }
    std::uint64_t ticks() const { return seq_; }

private:
    void start_input(nmf::InputPreset input, std::uint64_t seed);
    double current_set_point(double t);

    nmf::MotionFilter filter_;
    double set_point_ = 0.0;
    std::vector<nmf::SetPoint> input_;
    std::size_t cursor_ = 0;
    std::uint64_t seq_ = 0;
};

std::string error_message(std::string_view message);

/// Newline-delimited JSON over TCP. Each connection gets its own Session
/// and thread; frames are paced by the wall clock at the session's rate.
class SessionServer {
public:
    SessionServer(std::string host, std::uint16_t port, double rate);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and starts accepting; returns the bound port (useful with port
    /// 0). Throws std::system_error when the address cannot be bound.
    std::uint16_t start();

    /// Closes the listener and all sessions, then joins their threads.
    void stop();

    /// Blocks until stop() is called from another thread or a signal.
    void wait();

private:
    void accept_loop();
    void serve(int fd);

    std::string host_;
    std::uint16_t port_;
    double rate_;
    int listener_ = -1;
    std::atomic<bool> running_{false};
    std::thread acceptor_;
    std::mutex mutex_;
    std::vector<std::thread> workers_;
    std::vector<int> clients_;
};

}  // namespace nutty
