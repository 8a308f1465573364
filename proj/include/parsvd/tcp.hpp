#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "parsvd/comm.hpp"

namespace parsvd::comm {

struct Endpoint {
    std::string host;
    std::uint16_t port = 0;
};

// "host:port"; throws InvalidArgument.
Endpoint parse_endpoint(const std::string& text);

// Listening socket for rank 0. Port 0 binds an ephemeral port, readable via
// port() before any peer is launched.
class TcpListener {
public:
    explicit TcpListener(const Endpoint& where);
    ~TcpListener();
    TcpListener(TcpListener&& other) noexcept;
    TcpListener& operator=(TcpListener&&) = delete;
    TcpListener(const TcpListener&) = delete;

    std::uint16_t port() const noexcept { return port_; }
    int release() noexcept;

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
};

// Rank 0: accepts world_size - 1 peers, then routes every frame whose
// destination is not itself.
std::unique_ptr<Transport> tcp_root(TcpListener listener, Rank world_size, const CommOptions& opts = {});

// Ranks 1..world_size-1: connect (retrying until the deadline) and announce.
std::unique_ptr<Transport> tcp_connect(const Endpoint& root, Rank rank, Rank world_size, const CommOptions& opts = {});

inline constexpr const char* kEnvWorldSize = "PARSVD_WORLD_SIZE";
inline constexpr const char* kEnvRank = "PARSVD_RANK";
inline constexpr const char* kEnvRootAddr = "PARSVD_ROOT_ADDR";

struct TcpEnvironment {
    Rank rank = 0;
    Rank world_size = 1;
    Endpoint root;
};

// Reads the three variables above; InvalidArgument names any that is missing
// or malformed.
TcpEnvironment tcp_environment();

// Rank 0 listens on the root address, other ranks connect to it.
std::unique_ptr<Transport> tcp_from_environment(const TcpEnvironment& env, const CommOptions& opts = {});

}  // namespace parsvd::comm
