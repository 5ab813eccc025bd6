// SPDX-License-Identifier: Apache-2.0
#include "scaffold.hpp"

#include "vlab/common/error.hpp"

#include <fstream>

namespace vlab::cli {

namespace {

const char *protocol_yaml = R"(# Experimental design: factors, the treatments built from them, lobbies and
# batches. `vlab validate .` checks this file.
factors:
  - {name: playerCount, type: integer, values: [2]}
  - {name: showPartner, type: boolean, values: [true, false]}
treatments:
  - {name: visible, assignments: {playerCount: 2, showPartner: true}}
  - {name: hidden, assignments: {playerCount: 2, showPartner: false}}
lobbies:
  - {name: default, timeout: 300, strategy: fail}
batches:
  - name: pilot
    assignment: complete
    lobby: default
    quotas:
      - {treatment: visible, games: 1}
      - {treatment: hidden, games: 1}
)";

const char *game_yaml = R"(# Game structure. Each round runs the stages in order; a stage ends when its
# timer runs out or, with advance_on_submit, when every player has submitted.
name: starter
intro_steps: 1
disconnect: {mode: continue_without, grace: 30}
rounds: 2
stages:
  - {name: choose, duration: 60, advance_on_submit: true}
  - {name: result, duration: 5}
public_keys: [choice]
)";

const char *bots_yaml = R"(# Smoke-test participants for `vlab simulate`. count 0 fills every seat the
# batch has.
bots:
  - name: smoke
    count: 0
    think: {min: 200, max: 2000}
    handlers:
      - stage: choose
        actions:
          - set: {scope: player_round, key: choice, choice: [left, right]}
          - submit
)";

const char *server_yaml = R"(# Server settings. Flags and VLAB_* environment variables override these.
host: 127.0.0.1
port: 8081
admin_port: 8080
journal: vlab.journal
accounts: accounts.yaml
game: game.yaml
)";

const char *consent_md = R"(# Consent to participate

You are invited to take part in a research study run by [RESEARCH GROUP] at
[INSTITUTION]. Please read this page before deciding.

**What you will do.** You will play a short interactive task with other
participants. It takes about [DURATION] minutes.

**Payment.** You will receive [BASE PAYMENT] for completing the study.

**Risks and benefits.** There are no risks beyond those of everyday computer
use. You may not benefit directly.

**Your data.** We record your choices and the timing of your actions. Your
recruitment-platform identifier is kept separately and is removed from every
data export. Anonymized data may be shared with other researchers.

**Voluntary participation.** You may stop at any time by closing the window.

**Contact.** Questions about the study: [CONTACT EMAIL]. Questions about your
rights as a participant: [ETHICS BOARD CONTACT]. Protocol number:
[PROTOCOL NUMBER].

By continuing you confirm that you are at least 18 years old and agree to take
part.
)";

const char *intro_md = R"(# Instructions

You will be matched with another participant. Each round you pick left or
right, then see the result for a few seconds. There are two rounds.
)";

const char *outro_md = R"(# Thank you

The study is over. Please answer the short questions below before you leave.

1. Was anything unclear?
2. Did you experience technical problems?
)";

const char *readme_md = R"(# Experiment

    vlab validate .                        # check the design
    vlab simulate . --seed 1               # play it with bots on a virtual clock
    vlab admin-user add admin              # create an admin account
    vlab serve --config vlab.yaml          # run it

The admin console is at http://127.0.0.1:8080/admin/ and the participant
client at http://127.0.0.1:8080/play-ui/.
)";

} // namespace

const std::vector<ScaffoldFile> &scaffold_files()
{
    static const std::vector<ScaffoldFile> files = {
        {"README.md", readme_md},   {"bots.yaml", bots_yaml},   {"consent.md", consent_md},
        {"game.yaml", game_yaml},   {"intro.md", intro_md},     {"outro.md", outro_md},
        {"protocol.yaml", protocol_yaml}, {"vlab.yaml", server_yaml},
    };
    return files;
}

std::vector<std::filesystem::path> scaffold(const std::filesystem::path &dir, bool force)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    if (fs::exists(dir, ec)) {
        if (!fs::is_directory(dir, ec))
            fail(Errc::conflict, dir.string() + " exists and is not a directory");
        if (!fs::is_empty(dir, ec) && !force)
            fail(Errc::conflict, dir.string() + " is not empty (use --force to overwrite)");
    }
    fs::create_directories(dir, ec);
    if (ec)
        fail(Errc::io_error, "cannot create " + dir.string() + ": " + ec.message());

    std::vector<fs::path> written;
    for (const auto &file : scaffold_files()) {
        auto path = dir / file.path;
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out << file.content;
        if (!out)
            fail(Errc::io_error, "cannot write " + path.string());
        written.push_back(path);
    }
    return written;
}

} // namespace vlab::cli
