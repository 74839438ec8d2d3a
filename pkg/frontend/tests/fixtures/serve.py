"""Run the preview server on an OS-assigned port; prints the port first."""

import socket

import uvicorn

from reshoot.server import create_app


def main() -> None:
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.bind(("127.0.0.1", 0))
    sock.listen(128)
    print(sock.getsockname()[1], flush=True)
    uvicorn.run(create_app(), fd=sock.fileno(), log_level="warning")


if __name__ == "__main__":
    main()
