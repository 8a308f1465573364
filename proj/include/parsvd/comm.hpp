#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "parsvd/matrix.hpp"
#include "parsvd/wire.hpp"

namespace parsvd::comm {

using Rank = std::uint32_t;
using Tag = std::uint32_t;
using Clock = std::chrono::steady_clock;

// User tags must stay below this; collectives and the TCP handshake use the
// range above it.
inline constexpr Tag kReservedTagBase = 0x7FFF0000u;
inline constexpr Tag kGatherTag = kReservedTagBase + 1;
inline constexpr Tag kBroadcastTag = kReservedTagBase + 2;
inline constexpr Tag kHelloTag = 0xFFFFFFFFu;
inline constexpr Tag kByeTag = 0xFFFFFFFEu;

struct CommOptions {
    std::chrono::milliseconds deadline{30000};
    // Per (source, tag) channel capacity in the simulator.
    std::size_t channel_capacity = 1024;
};

struct SentMessage {
    Rank dest;
    Tag tag;
    std::size_t matrix_bytes;  // WireMatrix length
    std::size_t frame_bytes;   // matrix_bytes + frame header
};

//
// Incoming messages for one rank, keyed by (source, tag); FIFO per key.
//
class Mailbox {
public:
    explicit Mailbox(std::size_t capacity = SIZE_MAX) : capacity_(capacity) {}

    void push(Rank source, Tag tag, wire::Bytes payload, Clock::time_point deadline);
    wire::Bytes pop(Rank source, Tag tag, Clock::time_point deadline);
    // Wakes all waiters; later push/pop calls throw `reason` as the given kind.
    void abort(std::string reason, bool connection_lost = false);

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::map<std::pair<Rank, Tag>, std::deque<wire::Bytes>> queues_;
    std::size_t capacity_;
    std::optional<std::string> aborted_;
    bool connection_lost_ = false;

    void throw_if_aborted() const;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual Rank rank() const = 0;
    virtual Rank world_size() const = 0;
    virtual void send_bytes(Rank dest, Tag tag, wire::Bytes matrix_bytes) = 0;
    virtual wire::Bytes recv_bytes(Rank source, Tag tag, Clock::time_point deadline) = 0;
};

//
// One participant's view of a world. Owned by a single execution context.
//
class RankContext {
public:
    explicit RankContext(std::unique_ptr<Transport> transport, CommOptions opts = {});

    Rank rank() const { return transport_->rank(); }
    Rank world_size() const { return transport_->world_size(); }
    bool is_root(Rank root = 0) const { return rank() == root; }
    const CommOptions& options() const { return opts_; }

    void send(const DenseMatrix& value, Rank dest, Tag tag);
    DenseMatrix recv(Rank source, Tag tag);

    // Root receives every rank's matrix ordered by rank; others get nullopt.
    std::optional<std::vector<DenseMatrix>> gather(const DenseMatrix& local, Rank root = 0);
    // Non-root arguments are placeholders.
    DenseMatrix broadcast(const DenseMatrix& value, Rank root = 0);
    std::vector<double> broadcast(const std::vector<double>& value, Rank root = 0);

    const std::vector<SentMessage>& sent_log() const { return sent_; }
    void clear_sent_log() { sent_.clear(); }

private:
    std::unique_ptr<Transport> transport_;
    CommOptions opts_;
    std::vector<SentMessage> sent_;

    void send_raw(const DenseMatrix& value, Rank dest, Tag tag);
    DenseMatrix recv_raw(Rank source, Tag tag);
    void check_peer(Rank r, const char* what) const;
};

//
// In-process world: each rank runs on its own thread and the ranks exchange
// copies of encoded frames through bounded per-channel queues.
//
class SimulatedWorld {
public:
    SimulatedWorld(Rank world_size, CommOptions opts = {});
    Rank world_size() const { return static_cast<Rank>(boxes_.size()); }
    std::unique_ptr<Transport> transport(Rank rank);
    Mailbox& mailbox(Rank rank) { return *boxes_.at(rank); }
    void abort(const std::string& reason);
    const CommOptions& options() const { return opts_; }

private:
    std::vector<std::unique_ptr<Mailbox>> boxes_;
    CommOptions opts_;
};

// Runs body once per rank on separate threads and rethrows the first failure
// (lowest rank first); a failing rank aborts the world so peers do not hang.
void run_simulated(Rank world_size, const std::function<void(RankContext&)>& body, CommOptions opts = {});

}  // namespace parsvd::comm
