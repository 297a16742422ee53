"""Adapter for a real MQTT 3.1.1 broker over TLS.

This is the live counterpart of the simulation broker and shares its
publish/subscribe surface. It needs the optional paho-mqtt dependency
(``pip install edgeti[mqtt]``) and is excluded from the deterministic test
surface: the hermetic suite only exercises the missing-dependency path.
"""

from __future__ import annotations

from edgeti.errors import TransportError
from edgeti.domain.codec import encode_envelope
from edgeti.domain.types import DeviceId
from edgeti.transport import OutboundMessage, TopicFilter

PAHO_HINT = "paho-mqtt is not installed; install the 'mqtt' extra to use a real broker"


def _load_paho():
    try:
        import paho.mqtt.client as mqtt
    except ImportError:
        raise TransportError(PAHO_HINT) from None
    return mqtt


class MqttBus:
    """Blocking client bound to one device identity.

    QoS maps directly (at-most-once -> 0, at-least-once -> 1); the MQTT
    client id is the rendered device id and the connection always uses TLS.
    """

    def __init__(
        self,
        host: str,
        port: int,
        identity: DeviceId,
        keepalive: int = 60,
        tls: bool = True,
    ) -> None:
        mqtt = _load_paho()
        self.identity = identity
        self._client = mqtt.Client(client_id=str(identity), clean_session=True)
        if tls:
            self._client.tls_set()
        self._callbacks = []
        self._client.connect(host, port, keepalive)

    def publish(self, message: OutboundMessage) -> None:
        payload = encode_envelope(message.envelope)
        result = self._client.publish(
            str(message.topic), payload, qos=message.qos.value
        )
        if result.rc != 0:
            raise TransportError(f"publish failed with rc={result.rc}")

    def subscribe(self, filter: TopicFilter | str, callback) -> None:
        rendered = str(filter)

        def on_message(client, userdata, msg):
            callback(msg.topic, msg.payload)

        self._client.message_callback_add(rendered, on_message)
        self._callbacks.append(on_message)
        self._client.subscribe(rendered, qos=1)

    def loop_forever(self) -> None:
        self._client.loop_forever()

    def loop_start(self) -> None:
        self._client.loop_start()

    def loop_stop(self) -> None:
        self._client.loop_stop()

    def close(self) -> None:
        self._client.disconnect()
