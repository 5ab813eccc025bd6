// SPDX-License-Identifier: Apache-2.0
#include "pages.hpp"

namespace vlab {

std::string_view admin_page()
{
    return R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>vlab admin</title>
<style>
body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:.3em .6em}
#ticker{font-family:monospace;font-size:12px;max-height:20em;overflow:auto;background:#f6f6f6}
</style></head><body>
<h1>vlab admin</h1>
<form id="login"><input id="user" placeholder="user"> <input id="password" type="password" placeholder="password">
<button>Log in</button></form>
<div id="board" hidden>
<h2>Protocols</h2>
<textarea id="yaml" rows="8" cols="80" placeholder="protocol YAML"></textarea><br><button id="import">Import</button>
<span id="imported"></span>
<h2>Batches</h2>
<input id="bprotocol" placeholder="protocol id"> <input id="bname" placeholder="batch name">
<button id="create">Create</button>
<table id="batches"><thead><tr><th>batch</th><th>status</th><th>games</th><th>players</th><th>lobby</th><th></th></tr></thead>
<tbody></tbody></table>
<h2>Game</h2><input id="gid" placeholder="game id"> <button id="terminate">Terminate</button>
<h2>Events</h2><div id="ticker"></div>
</div>
<script>
let token = sessionStorage.getItem('vlab-admin');
const $ = id => document.getElementById(id);
async function api(method, path, body, type) {
  const r = await fetch(path, {method, headers: {'Authorization': 'Bearer ' + token,
    'Content-Type': type || 'application/json'}, body});
  if (r.status === 401) { sessionStorage.removeItem('vlab-admin'); location.reload(); }
  const text = await r.text();
  if (!r.ok) { alert(text); throw new Error(text); }
  try { return JSON.parse(text); } catch (e) { return text; }
}
function counts(o) { return Object.entries(o).filter(([k, v]) => v && k !== 'total').map(([k, v]) => k + ' ' + v).join(', '); }
async function refresh() {
  const rows = await api('GET', '/api/batches');
  const tbody = $('batches').tBodies[0];
  tbody.innerHTML = '';
  for (const b of rows) {
    const tr = tbody.insertRow();
    const lobby = b.lobby.filter(s => s.open).map(s => s.game + ' ' + s.seated + '/' + s.capacity).join(', ');
    for (const v of [b.id, b.status, counts(b.games), counts(b.players), lobby]) tr.insertCell().textContent = v;
    const cell = tr.insertCell();
    for (const verb of ['start', 'stop']) {
      const btn = document.createElement('button');
      btn.textContent = verb;
      btn.onclick = () => api('POST', '/api/batches/' + b.id + '/' + verb).then(refresh);
      cell.appendChild(btn);
    }
  }
}
function board() {
  $('login').hidden = true; $('board').hidden = false;
  refresh(); setInterval(refresh, 1000);
  const es = new EventSource('/api/events?access_token=' + encodeURIComponent(token));
  es.onmessage = es.onerror = null;
  for (const type of ['hello', 'protocol', 'batch', 'game', 'player', 'lobby'])
    es.addEventListener(type, e => {
      const line = document.createElement('div');
      line.textContent = type + ' ' + e.data;
      $('ticker').prepend(line);
    });
}
$('login').onsubmit = async e => {
  e.preventDefault();
  const r = await fetch('/api/login', {method: 'POST', body: JSON.stringify({user: $('user').value, password: $('password').value})});
  if (!r.ok) { alert('login failed'); return; }
  token = (await r.json()).token; sessionStorage.setItem('vlab-admin', token); board();
};
$('import').onclick = async () => { const r = await api('POST', '/api/protocols', $('yaml').value, 'application/yaml');
  $('imported').textContent = r.id; $('bprotocol').value = r.id; };
$('create').onclick = () => api('POST', '/api/batches', JSON.stringify({protocol: $('bprotocol').value, batch: $('bname').value})).then(refresh);
$('terminate').onclick = () => api('POST', '/api/games/' + $('gid').value + '/terminate').then(refresh);
if (token) board();
</script></body></html>
)html";
}

std::string_view play_page()
{
    return R"html(<!doctype html>
<html><head><meta charset="utf-8"><title>vlab</title>
<style>body{font-family:sans-serif;margin:2em}pre{background:#f6f6f6;padding:.5em}</style></head><body>
<div id="connect"><input id="url" size="40"> <input id="identifier" placeholder="identifier">
<button id="go">Join</button></div>
<h2 id="phase"></h2><div id="status"></div>
<button id="submit" hidden>Continue</button>
<pre id="view"></pre>
<script>
const $ = id => document.getElementById(id);
$('url').value = new URLSearchParams(location.search).get('ws') || ('ws://' + location.hostname + ':8081/play');
let ws, seq = 0, flow = {}, game = null, view = {}, retry = 0;
function send(type, body) { ws.send(JSON.stringify({type, seq: ++seq, body: body || {}})); }
function render(lobby) {
  $('phase').textContent = flow.phase || '';
  const stage = game && game.stage ? game.stage : null;
  $('submit').hidden = !['consent', 'intro', 'outro'].includes(flow.phase) && !stage;
  if (flow.phase === 'lobby' && lobby)
    $('status').textContent = 'waiting ' + Math.round(lobby.waiting_ms / 1000) + ' s, waiting for ' + lobby.players_needed + ' more players';
  else if (flow.phase === 'outro' || flow.phase === 'exited')
    $('status').textContent = flow.reason ? 'finished: ' + flow.reason : 'finished';
  else $('status').textContent = stage ? 'stage ' + (stage.name || stage.id) : '';
  $('view').textContent = JSON.stringify(view, null, 1);
}
function absorb(body) {
  if (body.flow) flow = body.flow;
  if ('game' in body) game = body.game;
  for (const a of body.attributes || []) view[a.scope + ' ' + a.key] = a.value;
  render(body.lobby);
}
function connect() {
  const token = localStorage.getItem('vlab-token');
  ws = new WebSocket($('url').value); seq = 0;
  ws.onopen = () => { retry = 0; send('hello', token ? {token} : {identifier: $('identifier').value}); };
  ws.onclose = () => { $('status').textContent = 'reconnecting'; setTimeout(connect, Math.min(5000, 250 * 2 ** retry++)); };
  ws.onmessage = m => {
    const f = JSON.parse(m.data), b = f.body;
    if (f.type === 'welcome') { if (b.token) localStorage.setItem('vlab-token', b.token); view = {}; absorb(b); }
    else if (f.type === 'transition') absorb(b);
    else if (f.type === 'change') {
      const k = b.scope + ' ' + b.key;
      if (b.op === 'append') (view[k] = view[k] || []).push(b.value); else view[k] = b.value;
      render();
    } else if (f.type === 'heartbeat') send('heartbeat_ack');
    else if (f.type === 'error') $('status').textContent = 'error: ' + b.message;
  };
}
$('go').onclick = () => { $('connect').hidden = true; connect(); };
$('submit').onclick = () => {
  if (flow.phase === 'consent' || flow.phase === 'intro') send('submit', {step: flow.phase});
  else if (flow.phase === 'outro') send('submit', {step: 'survey'});
  else if (game && game.stage) send('submit', {step: 'stage', stage: game.stage.id});
};
if (localStorage.getItem('vlab-token')) { $('connect').hidden = true; connect(); }
</script></body></html>
)html";
}

} // namespace vlab
