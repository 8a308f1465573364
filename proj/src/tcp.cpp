#include "parsvd/tcp.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <charconv>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "parsvd/error.hpp"

namespace parsvd::comm {

namespace {

std::string os_error(const std::string& what) { return what + ": " + std::strerror(errno); }

bool write_all(int fd, const std::byte* data, std::size_t n) {
    while (n > 0) {
        const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
        if (w < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += w;
        n -= static_cast<std::size_t>(w);
    }
    return true;
}

bool read_exact(int fd, std::byte* data, std::size_t n) {
    while (n > 0) {
        const ssize_t r = ::recv(fd, data, n, 0);
        if (r == 0) return false;
        if (r < 0) {
            if (errno == EINTR) continue;
            return false;
        }
        data += r;
        n -= static_cast<std::size_t>(r);
    }
    return true;
}

struct Frame {
    wire::FrameHeader header;
    wire::Bytes matrix;
};

// nullopt on EOF or socket error; ProtocolError on a malformed frame.
std::optional<Frame> read_frame(int fd) {
    std::byte head[wire::kFrameHeaderBytes + wire::kMatrixHeaderBytes];
    if (!read_exact(fd, head, sizeof head)) return std::nullopt;
    Frame f;
    f.header = wire::decode_frame_header({head, wire::kFrameHeaderBytes});
    const std::span<const std::byte> mhead{head + wire::kFrameHeaderBytes, wire::kMatrixHeaderBytes};
    const std::size_t payload = wire::matrix_payload_bytes(mhead);
    f.matrix.assign(mhead.begin(), mhead.end());
    f.matrix.resize(wire::kMatrixHeaderBytes + payload);
    if (!read_exact(fd, f.matrix.data() + wire::kMatrixHeaderBytes, payload)) return std::nullopt;
    return f;
}

wire::Bytes frame_bytes(const wire::FrameHeader& h, const wire::Bytes& matrix) {
    wire::Bytes out = wire::encode_frame_header(h);
    out.insert(out.end(), matrix.begin(), matrix.end());
    return out;
}

sockaddr_in resolve(const Endpoint& ep) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const int rc = ::getaddrinfo(ep.host.c_str(), nullptr, &hints, &res);
    if (rc != 0 || res == nullptr)
        throw ConnectionError("cannot resolve host '" + ep.host + "': " + ::gai_strerror(rc));
    sockaddr_in addr{};
    std::memcpy(&addr, res->ai_addr, sizeof addr);
    ::freeaddrinfo(res);
    addr.sin_port = htons(ep.port);
    return addr;
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

//
// Rank 0 side of the star.
//
class TcpRootTransport final : public Transport {
public:
    TcpRootTransport(TcpListener listener, Rank world_size, const CommOptions& opts)
        : world_size_(world_size), opts_(opts), peers_(world_size) {
        const int lfd = listener.release();
        try {
            accept_all(lfd);
        } catch (...) {
            ::close(lfd);
            for (auto& p : peers_)
                if (p.fd >= 0) ::close(p.fd);
            throw;
        }
        ::close(lfd);
        for (Rank r = 1; r < world_size_; ++r) peers_[r].reader = std::thread([this, r] { route_from(r); });
    }

    ~TcpRootTransport() override {
        {
            std::unique_lock lock(bye_mutex_);
            bye_cv_.wait_until(lock, Clock::now() + opts_.deadline, [&] { return byes_ == world_size_ - 1; });
        }
        for (Rank r = 1; r < world_size_; ++r) ::shutdown(peers_[r].fd, SHUT_RDWR);
        for (Rank r = 1; r < world_size_; ++r)
            if (peers_[r].reader.joinable()) peers_[r].reader.join();
        for (Rank r = 1; r < world_size_; ++r) ::close(peers_[r].fd);
    }

    Rank rank() const override { return 0; }
    Rank world_size() const override { return world_size_; }

    void send_bytes(Rank dest, Tag tag, wire::Bytes matrix_bytes) override {
        if (dest == 0) {
            inbox_.push(0, tag, std::move(matrix_bytes), Clock::now() + opts_.deadline);
            return;
        }
        forward(dest, frame_bytes({tag, 0, dest}, matrix_bytes));
    }

    wire::Bytes recv_bytes(Rank source, Tag tag, Clock::time_point deadline) override {
        return inbox_.pop(source, tag, deadline);
    }

private:
    struct Peer {
        int fd = -1;
        std::mutex write_mutex;
        std::thread reader;
        bool said_bye = false;
    };

    Rank world_size_;
    CommOptions opts_;
    std::vector<Peer> peers_;
    Mailbox inbox_;
    std::mutex bye_mutex_;
    std::condition_variable bye_cv_;
    Rank byes_ = 0;

    void accept_all(int lfd) {
        const auto deadline = Clock::now() + opts_.deadline;
        Rank connected = 0;
        while (connected + 1 < world_size_) {
            const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now()).count();
            if (left <= 0)
                throw ConnectionError("tcp root: only " + std::to_string(connected) + " of " +
                                      std::to_string(world_size_ - 1) + " ranks connected before the deadline");
            pollfd pfd{lfd, POLLIN, 0};
            const int rc = ::poll(&pfd, 1, static_cast<int>(left));
            if (rc < 0 && errno != EINTR) throw ConnectionError(os_error("tcp root: poll"));
            if (rc <= 0) continue;
            const int fd = ::accept(lfd, nullptr, nullptr);
            if (fd < 0) throw ConnectionError(os_error("tcp root: accept"));
            set_nodelay(fd);
            const auto hello = read_frame(fd);
            if (!hello || hello->header.tag != kHelloTag) {
                ::close(fd);
                throw ProtocolError("tcp root: peer did not announce itself");
            }
            const Rank r = hello->header.source;
            if (r == 0 || r >= world_size_ || peers_[r].fd >= 0) {
                ::close(fd);
                throw ProtocolError("tcp root: invalid or duplicate rank " + std::to_string(r) + " announced");
            }
            peers_[r].fd = fd;
            ++connected;
        }
    }

    void forward(Rank dest, const wire::Bytes& bytes) {
        if (dest >= world_size_) throw ProtocolError("tcp root: frame for unknown rank " + std::to_string(dest));
        std::lock_guard lock(peers_[dest].write_mutex);
        if (!write_all(peers_[dest].fd, bytes.data(), bytes.size()))
            throw ConnectionError(os_error("tcp root: write to rank " + std::to_string(dest)));
    }

    void route_from(Rank r) {
        try {
            while (true) {
                auto frame = read_frame(peers_[r].fd);
                if (!frame) break;
                const auto& h = frame->header;
                if (h.tag == kByeTag) {
                    std::lock_guard lock(bye_mutex_);
                    peers_[r].said_bye = true;
                    ++byes_;
                    bye_cv_.notify_all();
                    continue;
                }
                if (h.source != r) throw ProtocolError("tcp root: rank " + std::to_string(r) + " sent a frame as " +
                                                       std::to_string(h.source));
                if (h.dest == 0)
                    inbox_.push(h.source, h.tag, std::move(frame->matrix), Clock::now() + opts_.deadline);
                else
                    forward(h.dest, frame_bytes(h, frame->matrix));
            }
            std::lock_guard lock(bye_mutex_);
            if (!peers_[r].said_bye) inbox_.abort("tcp root: rank " + std::to_string(r) + " disconnected", true);
        } catch (const std::exception& e) {
            inbox_.abort(e.what(), true);
        }
    }
};

//
// Ranks 1..N-1: one socket to the root.
//
class TcpPeerTransport final : public Transport {
public:
    TcpPeerTransport(const Endpoint& root, Rank rank, Rank world_size, const CommOptions& opts)
        : rank_(rank), world_size_(world_size), opts_(opts) {
        const sockaddr_in addr = resolve(root);
        const auto deadline = Clock::now() + opts_.deadline;
        while (true) {
            fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
            if (fd_ < 0) throw ConnectionError(os_error("tcp peer: socket"));
            if (::connect(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) break;
            const int err = errno;
            ::close(fd_);
            fd_ = -1;
            if (Clock::now() >= deadline)
                throw ConnectionError("tcp peer: cannot reach " + root.host + ":" + std::to_string(root.port) + ": " +
                                      std::strerror(err));
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        set_nodelay(fd_);
        const wire::Bytes hello = frame_bytes({kHelloTag, rank_, 0}, wire::encode_matrix(DenseMatrix()));
        if (!write_all(fd_, hello.data(), hello.size())) {
            ::close(fd_);
            throw ConnectionError(os_error("tcp peer: handshake"));
        }
        reader_ = std::thread([this] { receive_loop(); });
    }

    ~TcpPeerTransport() override {
        {
            const wire::Bytes bye = frame_bytes({kByeTag, rank_, 0}, wire::encode_matrix(DenseMatrix()));
            std::lock_guard lock(write_mutex_);
            write_all(fd_, bye.data(), bye.size());
        }
        if (reader_.joinable()) reader_.join();
        ::close(fd_);
    }

    Rank rank() const override { return rank_; }
    Rank world_size() const override { return world_size_; }

    void send_bytes(Rank dest, Tag tag, wire::Bytes matrix_bytes) override {
        if (dest == rank_) {
            inbox_.push(rank_, tag, std::move(matrix_bytes), Clock::now() + opts_.deadline);
            return;
        }
        const wire::Bytes bytes = frame_bytes({tag, rank_, dest}, matrix_bytes);
        std::lock_guard lock(write_mutex_);
        if (!write_all(fd_, bytes.data(), bytes.size()))
            throw ConnectionError(os_error("tcp peer: write to root"));
    }

    wire::Bytes recv_bytes(Rank source, Tag tag, Clock::time_point deadline) override {
        return inbox_.pop(source, tag, deadline);
    }

private:
    Rank rank_;
    Rank world_size_;
    CommOptions opts_;
    int fd_ = -1;
    std::mutex write_mutex_;
    std::thread reader_;
    Mailbox inbox_;

    void receive_loop() {
        try {
            while (auto frame = read_frame(fd_))
                inbox_.push(frame->header.source, frame->header.tag, std::move(frame->matrix),
                            Clock::now() + opts_.deadline);
            inbox_.abort("tcp peer: connection to root closed", true);
        } catch (const std::exception& e) {
            inbox_.abort(e.what(), true);
        }
    }
};

}  // namespace

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size())
        throw InvalidArgument("address '" + text + "' is not of the form host:port");
    Endpoint ep;
    ep.host = text.substr(0, colon);
    unsigned port = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, port);
    if (ec != std::errc{} || ptr != last || port > 65535)
        throw InvalidArgument("address '" + text + "' has an invalid port");
    ep.port = static_cast<std::uint16_t>(port);
    return ep;
}

TcpListener::TcpListener(const Endpoint& where) {
    const sockaddr_in addr = resolve(where);
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw ConnectionError(os_error("tcp listen: socket"));
    int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 64) != 0) {
        const std::string msg = os_error("tcp listen: bind " + where.host + ":" + std::to_string(where.port));
        ::close(fd_);
        throw ConnectionError(msg);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpListener::TcpListener(TcpListener&& other) noexcept : fd_(other.fd_), port_(other.port_) { other.fd_ = -1; }

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

int TcpListener::release() noexcept {
    const int fd = fd_;
    fd_ = -1;
    return fd;
}

std::unique_ptr<Transport> tcp_root(TcpListener listener, Rank world_size, const CommOptions& opts) {
    if (world_size == 0) throw InvalidArgument("tcp: world size must be at least 1");
    return std::make_unique<TcpRootTransport>(std::move(listener), world_size, opts);
}

std::unique_ptr<Transport> tcp_connect(const Endpoint& root, Rank rank, Rank world_size, const CommOptions& opts) {
    if (rank == 0 || rank >= world_size)
        throw InvalidArgument("tcp: rank " + std::to_string(rank) + " cannot connect in a world of size " +
                              std::to_string(world_size));
    return std::make_unique<TcpPeerTransport>(root, rank, world_size, opts);
}

namespace {

std::string require_env(const char* name) {
    const char* v = std::getenv(name);
    if (v == nullptr || *v == '\0') throw InvalidArgument(std::string("environment variable ") + name + " is not set");
    return v;
}

Rank parse_rank_env(const char* name) {
    const std::string text = require_env(name);
    unsigned long v = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || v > 0xFFFFFFFFul)
        throw InvalidArgument(std::string("environment variable ") + name + " is not a non-negative integer");
    return static_cast<Rank>(v);
}

}  // namespace

TcpEnvironment tcp_environment() {
    TcpEnvironment env;
    env.world_size = parse_rank_env(kEnvWorldSize);
    env.rank = parse_rank_env(kEnvRank);
    env.root = parse_endpoint(require_env(kEnvRootAddr));
    if (env.world_size == 0) throw InvalidArgument(std::string(kEnvWorldSize) + " must be at least 1");
    if (env.rank >= env.world_size)
        throw InvalidArgument(std::string(kEnvRank) + " must be below " + kEnvWorldSize);
    return env;
}

std::unique_ptr<Transport> tcp_from_environment(const TcpEnvironment& env, const CommOptions& opts) {
    if (env.rank == 0) return tcp_root(TcpListener(env.root), env.world_size, opts);
    return tcp_connect(env.root, env.rank, env.world_size, opts);
}

}  // namespace parsvd::comm
