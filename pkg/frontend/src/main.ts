import { EngineClient } from './client.js';
import {
  renderCalibrate, renderNetwork, renderRitual, renderScope, renderTransport,
  ScreenName, SCREENS,
} from './dom.js';
import { ConsoleSession } from './session.js';

const params = new URLSearchParams(location.search);
const defaultUrl = params.get('engine')
  ?? `ws://${location.hostname || '127.0.0.1'}:8765`;

const session = new ConsoleSession();
let currentScreen: ScreenName = 'scope';

const nav = document.getElementById('nav')!;
const content = document.getElementById('content')!;

const urlBox = {
  url: defaultUrl,
  apply(url: string) {
    this.url = url;
    client.setUrl(url);
  },
};

function render(): void {
  switch (currentScreen) {
    case 'scope': renderScope(session, content as HTMLElement); break;
    case 'calibrate': renderCalibrate(session, content as HTMLElement); break;
    case 'network': renderNetwork(session, content as HTMLElement); break;
    case 'ritual': renderRitual(session, content as HTMLElement); break;
    case 'transport':
      renderTransport(session, content as HTMLElement, urlBox);
      break;
  }
}

const client = new EngineClient(defaultUrl, session, () => render());

for (const screen of SCREENS) {
  const btn = document.createElement('button');
  btn.textContent = screen;
  btn.onclick = () => {
    currentScreen = screen;
    render();
  };
  nav.append(btn);
}

client.connect();
setInterval(render, 250); // staleness badge keeps ticking without frames
render();
