"""HTTP client for chat-completion style LLM endpoints."""

from __future__ import annotations

import logging
from typing import Any

import requests

from .const import DEFAULT_REQUEST_TIMEOUT
from .exceptions import TransportError

_LOGGER = logging.getLogger(__name__)


def mask_secret(secret: str) -> str:
    """Return a log-safe form of a credential."""
    return secret[:3] + "***"


class ChatClient:
    """Chat-completions client for the live interestingness judge.

    This class handles the HTTP session with the LLM endpoint: bearer-token
    authentication, JSON request bodies of the form ``{model, messages}``,
    and extraction of the reply text from the response document.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str,
        timeout: float = DEFAULT_REQUEST_TIMEOUT,
    ) -> None:
        """Initialize the client.

        Args:
            endpoint: Full URL of the chat-completions endpoint.
            model: Model identifier sent with every request.
            api_key: Bearer token for the endpoint.
            timeout: Per-request timeout in seconds.
        """
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._api_key = api_key
        self.session = requests.Session()
        self.session.headers.update(
            {
                "Authorization": f"Bearer {api_key}",
                "Content-Type": "application/json",
                "Accept": "application/json",
            }
        )
        _LOGGER.debug(
            "Chat client for %s (model %s, key %s)",
            endpoint,
            model,
            mask_secret(api_key),
        )

    def complete(self, messages: list[dict[str, str]]) -> str:
        """Send one chat request and return the reply text.

        Args:
            messages: Chat messages, each ``{"role": ..., "content": ...}``.

        Returns:
            The assistant reply text.

        Raises:
            TransportError: Network failure, non-200 status, or a response
                document without reply text.
        """
        payload: dict[str, Any] = {"model": self.model, "messages": messages}
        try:
            response = self.session.post(
                self.endpoint, json=payload, timeout=self.timeout
            )
        except requests.RequestException as err:
            raise TransportError(f"Request to {self.endpoint} failed: {err}") from err

        _LOGGER.debug("Judge endpoint response status: %s", response.status_code)
        if response.status_code != 200:
            raise TransportError(
                f"Judge endpoint returned status {response.status_code}",
                raw_response=response.text,
            )

        try:
            document = response.json()
            content = document["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as err:
            raise TransportError(
                f"Unexpected response document: {err}", raw_response=response.text
            ) from err
        if not isinstance(content, str):
            raise TransportError(
                "Response carries no reply text", raw_response=response.text
            )
        return content

    def close(self) -> None:
        """Close the underlying HTTP session."""
        self.session.close()
