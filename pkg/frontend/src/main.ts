import { mount } from "./app.js";

const app = mount(document);
void app.start().catch((err) => {
  const banner = document.getElementById("banner");
  if (banner) banner.textContent = `Could not reach the session server: ${err}`;
});
