// SPDX-License-Identifier: Apache-2.0
#include "vlab/net/ws_client.hpp"
#include "vlab/net/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <deque>
#include <optional>
#include <thread>

namespace vlab {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct WsClientPool::Impl {
    std::string host;
    std::uint16_t port;
    std::string path;
    asio::io_context ioc;
    std::optional<asio::executor_work_guard<asio::io_context::executor_type>> work;
    std::thread thread;

    Impl(std::string h, std::uint16_t p, std::string pa) : host(std::move(h)), port(p), path(std::move(pa))
    {
        work.emplace(ioc.get_executor());
        thread = std::thread([this] { ioc.run(); });
    }

    void stop()
    {
        if (!thread.joinable())
            return;
        work.reset();
        ioc.stop();
        thread.join();
    }
};

namespace {

class ClientSession : public std::enable_shared_from_this<ClientSession> {
public:
    ClientSession(asio::io_context &ioc, ChannelEvents events)
        : resolver_(asio::make_strand(ioc)), ws_(resolver_.get_executor()), events_(std::move(events))
    {
    }

    void open(const std::string &host, std::uint16_t port, const std::string &path)
    {
        path_ = path;
        host_ = host + ":" + std::to_string(port);
        resolver_.async_resolve(host, std::to_string(port),
                                [self = shared_from_this()](beast::error_code ec, tcp::resolver::results_type results) {
                                    if (ec)
                                        return self->fail();
                                    beast::get_lowest_layer(self->ws_).async_connect(
                                        results, [self](beast::error_code ec, tcp::endpoint) {
                                            if (ec)
                                                return self->fail();
                                            self->ws_.async_handshake(self->host_, self->path_,
                                                                      [self](beast::error_code ec) { self->on_open(ec); });
                                        });
                                });
    }

    void send(std::string text)
    {
        asio::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            if (self->closed_)
                return;
            self->queue_.push_back(std::move(text));
            if (self->open_ && self->queue_.size() == 1)
                self->write_next();
        });
    }

    void close()
    {
        asio::post(ws_.get_executor(), [self = shared_from_this()] {
            if (self->closed_)
                return;
            self->closed_ = true;
            self->silent_ = true;
            self->queue_.clear();
            if (self->open_)
                self->ws_.async_close(websocket::close_code::normal, [self](beast::error_code) {});
            else
                beast::get_lowest_layer(self->ws_).close();
        });
    }

private:
    void on_open(beast::error_code ec)
    {
        if (ec)
            return fail();
        if (closed_) {
            ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
            return;
        }
        beast::get_lowest_layer(ws_).expires_never();
        ws_.text(true);
        open_ = true;
        if (!queue_.empty())
            write_next();
        read_next();
    }

    void read_next()
    {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec)
                return self->fail();
            auto text = beast::buffers_to_string(self->buffer_.data());
            self->buffer_.consume(self->buffer_.size());
            if (!self->silent_)
                self->events_.strand->post([events = self->events_, text = std::move(text)]() mutable {
                    events.on_frame(std::move(text));
                });
            self->read_next();
        });
    }

    void write_next()
    {
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec)
                return self->fail();
            if (!self->queue_.empty())
                self->queue_.pop_front();
            if (!self->queue_.empty())
                self->write_next();
        });
    }

    void fail()
    {
        bool notify = !silent_;
        closed_ = true;
        silent_ = true;
        queue_.clear();
        if (notify)
            events_.strand->post([events = events_] { events.on_closed(); });
    }

    tcp::resolver resolver_;
    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buffer_;
    ChannelEvents events_;
    std::deque<std::string> queue_;
    std::string host_;
    std::string path_;
    bool open_ = false;
    bool closed_ = false;
    // No more callbacks into the bot once it closed the channel itself.
    bool silent_ = false;
};

class WsChannel final : public ClientChannel {
public:
    explicit WsChannel(std::shared_ptr<ClientSession> session) : session_(std::move(session)) {}
    ~WsChannel() override { close(); }

    void send(std::string text) override { session_->send(std::move(text)); }
    void close() override
    {
        if (!closed_.exchange(true))
            session_->close();
    }

private:
    std::shared_ptr<ClientSession> session_;
    std::atomic<bool> closed_{false};
};

} // namespace

WsClientPool::WsClientPool(std::string host, std::uint16_t port, std::string path)
    : impl_(std::make_shared<Impl>(std::move(host), port, std::move(path)))
{
}

WsClientPool::~WsClientPool()
{
    stop();
}

void WsClientPool::stop()
{
    impl_->stop();
}

Connector WsClientPool::connector()
{
    return [impl = impl_](ChannelEvents events) -> std::unique_ptr<ClientChannel> {
        auto session = std::make_shared<ClientSession>(impl->ioc, std::move(events));
        session->open(impl->host, impl->port, impl->path);
        return std::make_unique<WsChannel>(std::move(session));
    };
}

std::function<Connector(Hub &)> websocket_transport()
{
    return [](Hub &hub) -> Connector {
        auto server = std::make_shared<WsServer>(hub);
        server->start();
        auto pool = std::make_shared<WsClientPool>("127.0.0.1", server->port());
        auto inner = pool->connector();
        // The pool is released first so its sockets close before the server stops.
        auto keep = std::make_shared<std::pair<std::shared_ptr<WsServer>, std::shared_ptr<WsClientPool>>>(server, pool);
        return [keep, inner](ChannelEvents events) { return inner(std::move(events)); };
    };
}

} // namespace vlab
