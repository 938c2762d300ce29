// SPDX-License-Identifier: Apache-2.0

#include "nasforge/ppe_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <thread>
#include <vector>

#include "nasforge/errors.hpp"
#include "nasforge/json_strict.hpp"
#include "nasforge/serde.hpp"
#include "nasforge/wire.hpp"

namespace nasforge::ppe {
namespace {

// Shared by the reader that produces frames and the workers that write
// responses. The fd is closed once both sides are done with it.
struct Conn {
  int fd = -1;
  std::mutex write_mutex;
  bool write_ok = true;  // guarded by write_mutex

  explicit Conn(int f) : fd(f) {}
  ~Conn() {
    if (fd >= 0) ::close(fd);
  }

  void poison() {
    std::lock_guard<std::mutex> lock(write_mutex);
    write_ok = false;
    ::shutdown(fd, SHUT_RDWR);
  }

  void send_payload(const std::string& payload) {
    std::lock_guard<std::mutex> lock(write_mutex);
    if (!write_ok) return;
    try {
      wire::write_frame(fd, payload);
    } catch (const NetworkError&) {
      write_ok = false;
    }
  }
};

struct Task {
  std::shared_ptr<Conn> conn;
  std::string payload;
};

}  // namespace

struct PpeServer::Impl {
  ServerOptions options;

  int listen_fd = -1;
  std::uint16_t bound_port = 0;
  std::atomic<bool> started{false};
  std::atomic<bool> stopping{false};

  std::thread accept_thread;

  std::mutex conn_mutex;
  std::vector<std::shared_ptr<Conn>> conns;
  std::vector<std::thread> readers;

  std::mutex queue_mutex;
  std::condition_variable queue_cv;
  std::condition_variable idle_cv;
  std::deque<Task> queue;
  int busy_workers = 0;
  bool workers_stop = false;
  std::vector<std::thread> workers;

  // ---------------------------------------------------------- lifecycle --

  void start() {
    if (started) throw ValidationError("server already started");
    options.config.validate();
    if (options.max_concurrent < 1)
      throw ValidationError("max_concurrent must be positive");

    listen_fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd < 0)
      throw BindError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(listen_fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(options.port);
    if (::inet_pton(AF_INET, options.host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd);
      listen_fd = -1;
      throw BindError("bad listen address " + options.host);
    }
    if (::bind(listen_fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) !=
        0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd);
      listen_fd = -1;
      throw BindError("cannot bind " + options.host + ":" +
                      std::to_string(options.port) + ": " + why);
    }
    if (::listen(listen_fd, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd);
      listen_fd = -1;
      throw BindError("listen: " + why);
    }
    sockaddr_in bound{};
    socklen_t len = sizeof bound;
    ::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&bound), &len);
    bound_port = ntohs(bound.sin_port);

    for (int i = 0; i < options.max_concurrent; ++i)
      workers.emplace_back([this] { worker_loop(); });
    accept_thread = std::thread([this] { accept_loop(); });
    started = true;
  }

  void stop() {
    if (!started) return;
    if (stopping.exchange(true)) return;

    ::shutdown(listen_fd, SHUT_RDWR);
    accept_thread.join();
    ::close(listen_fd);
    listen_fd = -1;

    // Wake readers; frames already queued still get served.
    {
      std::lock_guard<std::mutex> lock(conn_mutex);
      for (auto& c : conns) ::shutdown(c->fd, SHUT_RD);
    }
    for (std::thread& t : readers) t.join();

    // Drain, then retire the workers.
    {
      std::unique_lock<std::mutex> lock(queue_mutex);
      idle_cv.wait(lock, [this] { return queue.empty() && busy_workers == 0; });
      workers_stop = true;
    }
    queue_cv.notify_all();
    for (std::thread& t : workers) t.join();

    std::lock_guard<std::mutex> lock(conn_mutex);
    conns.clear();
  }

  // -------------------------------------------------------------- serve --

  void accept_loop() {
    for (;;) {
      int fd = ::accept(listen_fd, nullptr, nullptr);
      if (fd < 0) {
        if (errno == EINTR) continue;
        return;  // listener shut down
      }
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      auto conn = std::make_shared<Conn>(fd);
      std::lock_guard<std::mutex> lock(conn_mutex);
      if (stopping) {
        // Raced with stop(); the new connection is not served.
        continue;
      }
      conns.push_back(conn);
      readers.emplace_back([this, conn] { reader_loop(conn); });
    }
  }

  void reader_loop(const std::shared_ptr<Conn>& conn) {
    for (;;) {
      std::optional<std::string> payload;
      try {
        payload = wire::read_frame(conn->fd);
      } catch (const ProtocolError&) {
        conn->poison();
        return;
      } catch (const NetworkError&) {
        return;
      }
      if (!payload) return;  // clean EOF
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        queue.push_back(Task{conn, std::move(*payload)});
      }
      queue_cv.notify_one();
    }
  }

  void worker_loop() {
    for (;;) {
      Task task;
      {
        std::unique_lock<std::mutex> lock(queue_mutex);
        queue_cv.wait(lock, [this] { return workers_stop || !queue.empty(); });
        if (queue.empty()) return;
        task = std::move(queue.front());
        queue.pop_front();
        ++busy_workers;
      }
      handle(task);
      {
        std::lock_guard<std::mutex> lock(queue_mutex);
        --busy_workers;
      }
      idle_cv.notify_all();
    }
  }

  void handle(const Task& task) {
    wire::json doc;
    try {
      doc = jsonx::parse_strict(task.payload);
    } catch (const SchemaError&) {
      task.conn->poison();
      return;
    }

    wire::EstimateResponse resp;
    if (!doc.is_object() || !doc.contains("request_id") ||
        !doc["request_id"].is_string() ||
        doc["request_id"].get<std::string>().empty()) {
      task.conn->poison();
      return;
    }
    resp.request_id = doc["request_id"].get<std::string>();

    try {
      wire::EstimateRequest req = wire::request_from_json(doc, "request");
      const cost::AcceleratorConfig& cfg =
          req.accel ? *req.accel : options.config;
      cfg.validate();
      ir::PrimitiveGraph graph = ir::lower_model(req.model);
      cost::ModelMetrics metrics = cost::graph_metrics(graph, cfg);
      resp.status = wire::Status::kOk;
      resp.metrics = serde::metrics_to_json(
          metrics, req.detail == wire::Detail::kPerOp);
    } catch (const SchemaError& e) {
      resp.status = wire::Status::kInvalidModel;
      resp.error = e.what();
    } catch (const ValidationError& e) {
      resp.status = wire::Status::kInvalidModel;
      resp.error = e.what();
    } catch (const std::exception& e) {
      resp.status = wire::Status::kInternalError;
      resp.error = e.what();
    }

    task.conn->send_payload(wire::response_to_json(resp).dump());
  }
};

PpeServer::PpeServer(ServerOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
}

PpeServer::~PpeServer() {
  try {
    stop();
  } catch (...) {
  }
}

void PpeServer::start() { impl_->start(); }

std::uint16_t PpeServer::port() const { return impl_->bound_port; }

void PpeServer::stop() { impl_->stop(); }

bool PpeServer::running() const { return impl_->started && !impl_->stopping; }

}  // namespace nasforge::ppe
