// SPDX-License-Identifier: Apache-2.0
#include "vlab/bots/loopback.hpp"

#include <atomic>

namespace vlab {

namespace {

struct Link {
    ChannelEvents events;
    std::atomic<bool> closed{false};
};

class ServerEnd final : public Connection {
public:
    explicit ServerEnd(std::shared_ptr<Link> link) : link_(std::move(link)) {}

    void send(std::string text) override
    {
        if (link_->closed)
            return;
        link_->events.strand->post([link = link_, text = std::move(text)]() mutable {
            if (!link->closed)
                link->events.on_frame(std::move(text));
        });
    }

    void close() override
    {
        if (link_->closed.exchange(true))
            return;
        link_->events.strand->post([link = link_] { link->events.on_closed(); });
    }

private:
    std::shared_ptr<Link> link_;
};

class ClientEnd final : public ClientChannel {
public:
    ClientEnd(Hub &hub, std::shared_ptr<Link> link) : hub_(hub), link_(link)
    {
        id_ = hub_.attach(std::make_shared<ServerEnd>(std::move(link)));
    }

    ~ClientEnd() override { close(); }

    void send(std::string text) override
    {
        if (!link_->closed)
            hub_.receive(id_, text);
    }

    void close() override
    {
        if (done_)
            return;
        done_ = true;
        link_->closed = true;
        hub_.detach(id_);
    }

private:
    Hub &hub_;
    std::shared_ptr<Link> link_;
    Hub::ConnectionId id_ = 0;
    bool done_ = false;
};

} // namespace

Connector loopback_connector(Hub &hub)
{
    return [&hub](ChannelEvents events) -> std::unique_ptr<ClientChannel> {
        auto link = std::make_shared<Link>();
        link->events = std::move(events);
        return std::make_unique<ClientEnd>(hub, std::move(link));
    };
}

} // namespace vlab
