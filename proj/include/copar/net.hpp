#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "copar/generator.hpp"
#include "copar/message.hpp"
#include "copar/node.hpp"
#include "copar/workload.hpp"

namespace copar {

namespace net {

inline std::pair<std::string, int> split_address(const std::string& addr) {
  auto pos = addr.rfind(':');
  if (pos == std::string::npos) throw ConfigError("address must be host:port: " + addr);
  return {addr.substr(0, pos), std::stoi(addr.substr(pos + 1))};
}

inline bool send_all(int fd, const std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

inline bool recv_all(int fd, std::uint8_t* data, std::size_t len) {
  while (len > 0) {
    ssize_t n = ::recv(fd, data, len, 0);
    if (n <= 0) return false;
    data += n;
    len -= static_cast<std::size_t>(n);
  }
  return true;
}

}  // namespace net

// Stream-socket delivery substrate. Each peer link keeps one reader and one
// writer; decoded envelopes and timer deadlines are funneled into a single
// mailbox so the protocol state sees a serialized event stream, same as the
// simulator. Unreachable peers just lose messages.
class NetTransport {
 public:
  struct Incoming {
    NodeId from;
    Envelope env;
  };

  NetTransport(NodeId self, std::map<NodeId, std::string> addresses)
      : self_(self), addresses_(std::move(addresses)) {}

  ~NetTransport() { stop(); }

  void listen() {
    auto [host, port] = net::split_address(addresses_.at(self_));
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw ConfigError("cannot create listen socket");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    sa.sin_addr.s_addr = host == "0.0.0.0" ? INADDR_ANY : ::inet_addr(host.c_str());
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      throw ConfigError("cannot bind " + addresses_.at(self_));
    }
    if (::listen(listen_fd_, 16) != 0) throw ConfigError("cannot listen");
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  void send(NodeId to, const Envelope& env) {
    auto frame = encode_message(env);
    std::lock_guard<std::mutex> lk(conn_mu_);
    int fd = out_fd(to);
    if (fd < 0) return;  // unreachable: message lost
    if (!net::send_all(fd, frame.data(), frame.size())) {
      ::close(fd);
      out_conns_.erase(to);
    }
  }

  // Blocks until a message arrives, the deadline passes, or shutdown.
  // Returns false on timeout/shutdown with *out untouched.
  bool receive(Incoming* out, std::chrono::steady_clock::time_point deadline) {
    std::unique_lock<std::mutex> lk(mail_mu_);
    mail_cv_.wait_until(lk, deadline, [this] { return stopping_ || !mailbox_.empty(); });
    if (mailbox_.empty()) return false;
    *out = std::move(mailbox_.front());
    mailbox_.pop_front();
    return true;
  }

  void stop() {
    {
      std::lock_guard<std::mutex> lk(mail_mu_);
      if (stopping_) return;
      stopping_ = true;
    }
    mail_cv_.notify_all();
    if (listen_fd_ >= 0) {
      ::shutdown(listen_fd_, SHUT_RDWR);
      ::close(listen_fd_);
      listen_fd_ = -1;
    }
    {
      std::lock_guard<std::mutex> lk(conn_mu_);
      for (auto& [_, fd] : out_conns_) ::close(fd);
      out_conns_.clear();
      for (int fd : in_fds_) ::shutdown(fd, SHUT_RDWR);
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    for (auto& t : reader_threads_) {
      if (t.joinable()) t.join();
    }
  }

  bool stopping() const {
    std::lock_guard<std::mutex> lk(mail_mu_);
    return stopping_;
  }

 private:
  int out_fd(NodeId to) {
    auto it = out_conns_.find(to);
    if (it != out_conns_.end()) return it->second;
    auto addr_it = addresses_.find(to);
    if (addr_it == addresses_.end()) return -1;
    auto [host, port] = net::split_address(addr_it->second);
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) return -1;
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(port));
    sa.sin_addr.s_addr = ::inet_addr(host.c_str());
    if (::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
      ::close(fd);
      return -1;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    out_conns_[to] = fd;
    return fd;
  }

  void accept_loop() {
    while (true) {
      int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) return;
      {
        std::lock_guard<std::mutex> lk(conn_mu_);
        if (stopping()) {
          ::close(fd);
          return;
        }
        in_fds_.push_back(fd);
        reader_threads_.emplace_back([this, fd] { reader_loop(fd); });
      }
    }
  }

  void reader_loop(int fd) {
    int decode_errors = 0;
    while (true) {
      std::uint8_t len_buf[4];
      if (!net::recv_all(fd, len_buf, 4)) break;
      std::uint32_t len = 0;
      for (int i = 0; i < 4; ++i) len = (len << 8) | len_buf[i];
      if (len > kMaxFrameBytes) break;
      std::vector<std::uint8_t> frame(len + 4);
      std::memcpy(frame.data(), len_buf, 4);
      if (!net::recv_all(fd, frame.data() + 4, len)) break;
      try {
        Envelope env = decode_message(frame);
        std::lock_guard<std::mutex> lk(mail_mu_);
        mailbox_.push_back({env.sender, std::move(env)});
        mail_cv_.notify_one();
      } catch (const CodecError&) {
        if (++decode_errors >= 3) break;  // peer treated as unreachable
      }
    }
    ::close(fd);
  }

  NodeId self_;
  std::map<NodeId, std::string> addresses_;
  int listen_fd_ = -1;
  std::thread accept_thread_;
  std::vector<std::thread> reader_threads_;
  mutable std::mutex mail_mu_;
  std::condition_variable mail_cv_;
  std::deque<Incoming> mailbox_;
  bool stopping_ = false;
  std::mutex conn_mu_;
  std::map<NodeId, int> out_conns_;
  std::vector<int> in_fds_;
};

namespace net {

inline std::map<NodeId, std::string> address_map(const RunConfig& cfg) {
  std::map<NodeId, std::string> m;
  for (const auto& nd : cfg.nodes) {
    if (nd.address.empty()) throw ConfigError("networked mode needs an address for every node");
    m[nd.id] = nd.address;
  }
  if (cfg.generator_address.empty()) {
    throw ConfigError("networked mode needs generator_address");
  }
  m[kGeneratorId] = cfg.generator_address;
  return m;
}

struct TimerEntry {
  std::chrono::steady_clock::time_point when;
  TimerTag tag;
  long long aux;
};

// Shared event loop for networked node and generator processes.
template <typename Agent>
inline void run_loop(NetTransport& transport, Agent& agent, std::vector<TimerEntry>& timers,
                     const std::function<bool()>& should_stop) {
  using clock = std::chrono::steady_clock;
  while (!should_stop()) {
    auto deadline = clock::now() + std::chrono::milliseconds(200);
    for (const auto& t : timers) deadline = std::min(deadline, t.when);
    NetTransport::Incoming in;
    bool got = transport.receive(&in, deadline);
    auto now = clock::now();
    std::vector<TimerEntry> due;
    for (auto it = timers.begin(); it != timers.end();) {
      if (it->when <= now) {
        due.push_back(*it);
        it = timers.erase(it);
      } else {
        ++it;
      }
    }
    for (const auto& t : due) agent.on_timer(t.tag, t.aux);
    if (got) {
      if (in.env.type == MsgType::Ping && in.env.tx_seq == -1) return;  // shutdown
      agent.on_message(in.from, in.env);
    }
  }
}

inline NodeEnv make_net_env(NetTransport& transport, std::vector<TimerEntry>& timers,
                            std::chrono::steady_clock::time_point epoch, Trace* trace) {
  NodeEnv env;
  env.send = [&transport](NodeId to, const Envelope& e) { transport.send(to, e); };
  env.schedule = [&timers](long long delay_us, TimerTag tag, long long aux) {
    timers.push_back({std::chrono::steady_clock::now() + std::chrono::microseconds(delay_us), tag, aux});
  };
  env.now_us = [epoch]() {
    return std::chrono::duration_cast<std::chrono::microseconds>(
               std::chrono::steady_clock::now() - epoch)
        .count();
  };
  env.draw_proc_latency = []() { return 0ll; };
  env.trace = trace;
  return env;
}

}  // namespace net

// Runs one server process until the generator's shutdown ping. Returns the
// locally collected trace.
inline Trace run_net_node(const RunConfig& cfg, NodeId id) {
  NetTransport transport(id, net::address_map(cfg));
  transport.listen();
  Trace trace;
  trace.header() = cfg.echo();
  std::vector<net::TimerEntry> timers;
  auto epoch = std::chrono::steady_clock::now();
  ProtocolNode node(id, cfg, net::make_net_env(transport, timers, epoch, &trace));
  net::run_loop(transport, node, timers, [] { return false; });
  transport.stop();
  return trace;
}

// Drives a networked run; on completion broadcasts the shutdown ping.
inline Trace run_net_generator(const RunConfig& cfg) {
  NetTransport transport(kGeneratorId, net::address_map(cfg));
  transport.listen();
  Trace trace;
  trace.header() = cfg.echo();
  std::vector<net::TimerEntry> timers;
  auto epoch = std::chrono::steady_clock::now();
  GeneratorAgent gen(cfg, net::make_net_env(transport, timers, epoch, &trace));
  gen.start();
  net::run_loop(transport, gen, timers, [&gen] { return gen.done(); });
  // let in-flight optimistic traffic settle before tearing the pool down
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  Envelope shutdown{kWireVersion, MsgType::Ping, kGeneratorId, -1, EmptyPayload{}};
  for (const auto& nd : cfg.nodes) transport.send(nd.id, shutdown);
  transport.stop();
  return trace;
}

}  // namespace copar
