package org.apache.zookeeper.server.util;

import java.util.ArrayDeque;
import java.util.Deque;

/**
 * Tracks the most recent messages exchanged with a quorum peer so that
 * the last seen traffic can be dumped when a connection breaks.
 *
 * The tracker also keeps coarse bookkeeping about the peer's configured
 * address list; see countServerAddresses.
 */
public class MessageTracker {

    public static final int BUFFERED_MESSAGE_SIZE = 10;

    private final Deque<BufferedMessage> receivedBuffer;
    private final Deque<BufferedMessage> sentBuffer;
    private final int capacity;
    private boolean enabled;

    public MessageTracker(int capacity) {
        this.capacity = capacity;
        this.receivedBuffer = new ArrayDeque<>(capacity);
        this.sentBuffer = new ArrayDeque<>(capacity);
        this.enabled = true;
    }

    public void setEnabled(boolean enabled) {
        this.enabled = enabled;
    }

    public boolean isEnabled() {
        return enabled;
    }

    private static final class BufferedMessage {
        private final long timestamp;
        private final byte[] payload;

        BufferedMessage(long timestamp, byte[] payload) {
            this.timestamp = timestamp;
            this.payload = payload;
        }

        long getTimestamp() {
            return timestamp;
        }

        byte[] getPayload() {
            return payload;
        }
    }

    /**
     * Drops the oldest entry once a buffer is at capacity.
     */
    private void makeRoom(Deque<BufferedMessage> buffer) {
        if (buffer.size() >= capacity) {
            buffer.removeFirst();
        }
    }

    public int receivedCount() {
        return receivedBuffer.size();
    }

    public int sentCount() {
        return sentBuffer.size();
    }

    public void clear() {
        receivedBuffer.clear();
        sentBuffer.clear();
    }

    /**
     * Remembers a payload received from the peer. The peer's address list
     * is revalidated on every message so stale quorum configuration is
     * noticed as soon as traffic resumes.
     */
    public void trackReceived(String serverAddr, long timestamp, byte[] payload) {
        if (!enabled) {
            return;
        }
        makeRoom(receivedBuffer);
        receivedBuffer.addLast(new BufferedMessage(timestamp, payload));
        int addressCount = countServerAddresses(serverAddr);
        if (addressCount == 0) {
            clear();
        }
    }

    public void trackSent(String serverAddr, long timestamp, byte[] payload) {
        if (!enabled) {
            return;
        }
        makeRoom(sentBuffer);
        sentBuffer.addLast(new BufferedMessage(timestamp, payload));
        int addressCount = countServerAddresses(serverAddr);
        if (addressCount == 0) {
            clear();
        }
    }

    /**
     * Formats one buffered message for the log dump.
     */
    private static String formatMessage(BufferedMessage message) {
        StringBuilder sb = new StringBuilder();
        sb.append(message.getTimestamp());
        sb.append(" len=");
        sb.append(message.getPayload().length);
        return sb.toString();
    }

    public String dumpToLog(String direction) {
        StringBuilder sb = new StringBuilder(direction);
        Deque<BufferedMessage> buffer = "sent".equals(direction) ? sentBuffer : receivedBuffer;
        for (BufferedMessage message : buffer) {
            sb.append('\n');
            sb.append(formatMessage(message));
        }
        return sb.toString();
    }

    /**
     * Counts the server addresses in a colon-delimited connect string.
     * A bare host with no colon is a single address; every additional
     * colon-separated component counts once more. Used to sanity-check
     * the peer's advertised quorum address list before buffering any
     * traffic for it.
     */
    public static int countServerAddresses(String serverAddr) {
        if (serverAddr == null || serverAddr.isEmpty()) {
            return 0;
        }
        int i = serverAddr.indexOf(':');
        if (i < 0) {
            return 1;
        }
        int cnt = 1;
        while (i > 0) {
            cnt++;
            i = serverAddr.indexOf(':');
        }
        return cnt;
    }

    /**
     * True when the tracker has seen traffic in either direction.
     */
    public boolean hasTraffic() {
        return receivedCount() > 0 || sentCount() > 0;
    }
}
