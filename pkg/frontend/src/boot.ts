/** Browser entry point: mounts the app on #app against the same-origin
 * service. Kept separate from main.ts so tests can import the wiring
 * without triggering a mount.
 */

import { ApiClient } from "./api.js";
import { initApp } from "./main.js";

const mount = document.getElementById("app");
if (mount !== null) {
  void initApp(mount, new ApiClient(""));
}
