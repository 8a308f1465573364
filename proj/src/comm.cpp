#include "parsvd/comm.hpp"

#include <exception>
#include <thread>

#include "parsvd/error.hpp"

namespace parsvd::comm {

namespace {

// Raised in ranks woken by a peer's failure; never the root cause.
class WorldAborted : public Error {
public:
    using Error::Error;
};

std::string channel(Rank source, Tag tag) {
    return "source " + std::to_string(source) + ", tag " + std::to_string(tag);
}

}  // namespace

void Mailbox::throw_if_aborted() const {
    if (!aborted_) return;
    if (connection_lost_) throw ConnectionError(*aborted_);
    throw WorldAborted(*aborted_);
}

void Mailbox::push(Rank source, Tag tag, wire::Bytes payload, Clock::time_point deadline) {
    std::unique_lock lock(mutex_);
    auto& q = queues_[{source, tag}];
    if (!cv_.wait_until(lock, deadline, [&] { return aborted_ || q.size() < capacity_; }))
        throw TimeoutError("send: channel (" + channel(source, tag) + ") stayed full until the deadline");
    throw_if_aborted();
    q.push_back(std::move(payload));
    cv_.notify_all();
}

wire::Bytes Mailbox::pop(Rank source, Tag tag, Clock::time_point deadline) {
    std::unique_lock lock(mutex_);
    auto& q = queues_[{source, tag}];
    if (!cv_.wait_until(lock, deadline, [&] { return aborted_ || !q.empty(); }))
        throw TimeoutError("recv: no message from " + channel(source, tag) + " before the deadline");
    // deliver anything that arrived before a shutdown
    if (q.empty()) throw_if_aborted();
    wire::Bytes out = std::move(q.front());
    q.pop_front();
    cv_.notify_all();
    return out;
}

void Mailbox::abort(std::string reason, bool connection_lost) {
    std::lock_guard lock(mutex_);
    if (!aborted_) {
        aborted_ = std::move(reason);
        connection_lost_ = connection_lost;
    }
    cv_.notify_all();
}

RankContext::RankContext(std::unique_ptr<Transport> transport, CommOptions opts)
    : transport_(std::move(transport)), opts_(opts) {}

void RankContext::check_peer(Rank r, const char* what) const {
    if (r >= world_size())
        throw InvalidArgument(std::string(what) + ": rank " + std::to_string(r) + " outside world of size " +
                              std::to_string(world_size()));
}

void RankContext::send_raw(const DenseMatrix& value, Rank dest, Tag tag) {
    check_peer(dest, "send");
    wire::Bytes bytes = wire::encode_matrix(value);
    sent_.push_back({dest, tag, bytes.size(), bytes.size() + wire::kFrameHeaderBytes});
    transport_->send_bytes(dest, tag, std::move(bytes));
}

DenseMatrix RankContext::recv_raw(Rank source, Tag tag) {
    check_peer(source, "recv");
    const wire::Bytes bytes = transport_->recv_bytes(source, tag, Clock::now() + opts_.deadline);
    return wire::decode_matrix(bytes);
}

void RankContext::send(const DenseMatrix& value, Rank dest, Tag tag) {
    if (tag >= kReservedTagBase) throw InvalidArgument("send: tag " + std::to_string(tag) + " is reserved");
    send_raw(value, dest, tag);
}

DenseMatrix RankContext::recv(Rank source, Tag tag) {
    if (tag >= kReservedTagBase) throw InvalidArgument("recv: tag " + std::to_string(tag) + " is reserved");
    return recv_raw(source, tag);
}

std::optional<std::vector<DenseMatrix>> RankContext::gather(const DenseMatrix& local, Rank root) {
    check_peer(root, "gather");
    if (rank() != root) {
        send_raw(local, root, kGatherTag);
        return std::nullopt;
    }
    std::vector<DenseMatrix> out;
    out.reserve(world_size());
    for (Rank r = 0; r < world_size(); ++r) out.push_back(r == root ? local : recv_raw(r, kGatherTag));
    return out;
}

DenseMatrix RankContext::broadcast(const DenseMatrix& value, Rank root) {
    check_peer(root, "broadcast");
    if (rank() != root) return recv_raw(root, kBroadcastTag);
    for (Rank r = 0; r < world_size(); ++r)
        if (r != root) send_raw(value, r, kBroadcastTag);
    return value;
}

std::vector<double> RankContext::broadcast(const std::vector<double>& value, Rank root) {
    const DenseMatrix out = broadcast(DenseMatrix::column(value), root);
    return {out.data().begin(), out.data().end()};
}

namespace {

class SimulatedTransport final : public Transport {
public:
    SimulatedTransport(SimulatedWorld& world, Rank rank) : world_(world), rank_(rank) {}

    Rank rank() const override { return rank_; }
    Rank world_size() const override { return world_.world_size(); }

    void send_bytes(Rank dest, Tag tag, wire::Bytes matrix_bytes) override {
        world_.mailbox(dest).push(rank_, tag, std::move(matrix_bytes), Clock::now() + world_.options().deadline);
    }

    wire::Bytes recv_bytes(Rank source, Tag tag, Clock::time_point deadline) override {
        return world_.mailbox(rank_).pop(source, tag, deadline);
    }

private:
    SimulatedWorld& world_;
    Rank rank_;
};

}  // namespace

SimulatedWorld::SimulatedWorld(Rank world_size, CommOptions opts) : opts_(opts) {
    if (world_size == 0) throw InvalidArgument("simulated world: world size must be at least 1");
    boxes_.reserve(world_size);
    for (Rank r = 0; r < world_size; ++r) boxes_.push_back(std::make_unique<Mailbox>(opts.channel_capacity));
}

std::unique_ptr<Transport> SimulatedWorld::transport(Rank rank) {
    if (rank >= world_size()) throw InvalidArgument("simulated world: no rank " + std::to_string(rank));
    return std::make_unique<SimulatedTransport>(*this, rank);
}

void SimulatedWorld::abort(const std::string& reason) {
    for (auto& box : boxes_) box->abort(reason);
}

void run_simulated(Rank world_size, const std::function<void(RankContext&)>& body, CommOptions opts) {
    SimulatedWorld world(world_size, opts);
    std::vector<std::exception_ptr> errors(world_size);
    std::vector<char> secondary(world_size, 0);
    {
        std::vector<std::jthread> threads;
        threads.reserve(world_size);
        for (Rank r = 0; r < world_size; ++r) {
            threads.emplace_back([&, r] {
                try {
                    RankContext ctx(world.transport(r), opts);
                    body(ctx);
                } catch (const WorldAborted&) {
                    errors[r] = std::current_exception();
                    secondary[r] = 1;
                } catch (const std::exception& e) {
                    errors[r] = std::current_exception();
                    world.abort("rank " + std::to_string(r) + " failed: " + e.what());
                } catch (...) {
                    errors[r] = std::current_exception();
                    world.abort("rank " + std::to_string(r) + " failed");
                }
            });
        }
    }
    for (Rank r = 0; r < world_size; ++r)
        if (errors[r] && !secondary[r]) std::rethrow_exception(errors[r]);
    for (Rank r = 0; r < world_size; ++r)
        if (errors[r]) std::rethrow_exception(errors[r]);
}

}  // namespace parsvd::comm
